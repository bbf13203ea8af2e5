"""Named verification batteries, grouped into suites.

Every check yields a `CheckResult` with the measured residual and its
threshold.  Most checks pass when ``residual <= threshold``; witness checks
(``kind="witness"``) pass when the residual exceeds the threshold and
``kind="minimum"`` checks (the convergence order) when it reaches it.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import son
from .ball import (
    InertiaTensor,
    PhasePoint,
    conformal_factor,
    connection_A,
    connection_A_contact,
)
from .dynamics import (
    collinearity_residual,
    contact_path,
    dJH_matrix,
    field_batch,
    integrate_batch,
    relative_equilibrium_point,
    split_batch,
    solve_xnh,
)
from .forms import (
    FormTag,
    NearEquilibriumError,
    coframe_form,
    compose_forms,
    conformal_scalar,
    exterior_derivative_tensor,
    fd_frame_derivative,
    frame_coords,
    frame_vector,
    kit,
    sigma_connection,
    theta_S_form,
)
from .oracle import integrate_constrained, initial_full_state
from .reduction import (
    closedness_verdict,
    level_set_point,
    nonclosedness_witness,
    reduced_dimension_audit,
)

log = logging.getLogger(__name__)

__all__ = [
    "CheckResult",
    "SUITES",
    "SuiteReport",
    "run_suite",
    "structure_provider",
]


def structure_provider(n: int) -> son.StructureTensor:
    """Structure tensor consulted by the algebra battery (patchable in tests)."""
    return son.structure_constants(n)


@dataclass(frozen=True)
class CheckResult:
    name: str
    n: int
    residual: float
    threshold: float
    passed: bool
    criterion: int | None = None
    kind: str = "bound"
    detail: str = ""

    def line(self) -> str:
        op = {"witness": ">", "minimum": ">="}.get(self.kind, "<=")
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} n={self.n} {self.name}: {self.residual:.3e} {op} {self.threshold:.1e}" + (
            f" ({self.detail})" if self.detail else "")


def _bound(name, n, residual, threshold, criterion=None, detail=""):
    r = float(residual)
    return CheckResult(name, n, r, threshold, bool(np.isfinite(r) and r <= threshold), criterion, "bound", detail)


def _witness(name, n, residual, threshold, criterion=None, detail=""):
    r = float(residual)
    return CheckResult(name, n, r, threshold, bool(r > threshold), criterion, "witness", detail)


def _random_points(n, count, rng, scale=1.0):
    m = son.algebra_dim(n)
    s = np.stack([son.random_rotation(n, rng) for _ in range(count)])
    return s, scale * rng.standard_normal((count, m))


def _anisotropic(n, rng):
    return InertiaTensor.random(n, rng, spread=1.0)


# ---------------------------------------------------------------------------
# algebra


def algebra_battery(n: int, rng: np.random.Generator) -> list[CheckResult]:
    b = son.adapted_basis(n)
    st = structure_provider(n)
    C = np.asarray(st.C)
    M = np.stack(b.matrices)
    gram = -0.5 * np.einsum("iab,jba->ij", M, M)
    en = np.zeros(n)
    en[-1] = 1.0
    out = [
        _bound("basis_orthonormality", n, np.max(np.abs(gram - np.eye(b.dim))), 1e-13, 1),
        _bound("basis_Y_annihilates_e_n", n, np.max(np.abs(M[b.y_slice] @ en), initial=0.0), 0.0, 1),
        _bound("structure_antisymmetry", n, st.antisymmetry_residual(), 1e-12, 1),
        _bound("structure_jacobi", n, st.jacobi_residual(), 1e-12, 1),
    ]
    z, y = np.arange(b.dim)[b.z_slice], np.arange(b.dim)[b.y_slice]
    out.append(_bound("block_hh_into_hperp_vanishes", n,
                      np.max(np.abs(C[np.ix_(y, y, z)]), initial=0.0), 0.0, 1))
    out.append(_bound("block_h_hperp_into_h_vanishes", n,
                      np.max(np.abs(C[np.ix_(y, z, y)]), initial=0.0), 0.0, 1))
    if n == 3:
        out.append(_bound("c_Y3_Z1Z2_equals_minus_one", n, abs(C[0, 1, 2] + 1.0), 0.0, 1))
    # commutator oracle against the tensor
    brk = np.einsum("iab,jbc->ijac", M, M) - np.einsum("jab,ibc->ijac", M, M)
    out.append(_bound("structure_matches_commutators", n,
                      np.max(np.abs(brk - np.einsum("ijk,kab->ijab", C, M))), 1e-12, 1))
    x = rng.standard_normal((50, b.dim))
    out.append(_bound("coeff_roundtrip", n, np.max(np.abs(son.vee(son.hat(x, n)) - x)), 1e-14))
    s1, s2 = son.random_rotation(n, rng), son.random_rotation(n, rng)
    X = son.hat(x[0], n)
    lhs = son.ad_action(s1 @ s2, X)
    rhs = son.ad_action(s1, son.ad_action(s2, X))
    out.append(_bound("ad_composition", n, np.max(np.abs(lhs - rhs)), 1e-12))
    g = son.group_exp(son.hat(3.0 * x[:10], n))
    out.append(_bound("group_exp_orthogonal", n,
                      np.max(np.abs(np.swapaxes(g, -1, -2) @ g - np.eye(n))), 1e-12))
    return out


# ---------------------------------------------------------------------------
# forms


def forms_battery(n: int, rng: np.random.Generator, points: int = 10) -> list[CheckResult]:
    m = son.algebra_dim(n)
    I = _anisotropic(n, rng)
    C = kit(n).C
    theta = theta_S_form(I)
    omS = compose_forms(FormTag.OMEGA_S, I)
    dual = drho = drho_fd = dth = dth_fd = dom = dom_fd = fder = contact = 0.0
    coframes = [coframe_form(n, i) for i in range(m)]
    for _ in range(points):
        p = PhasePoint(son.random_rotation(n, rng), rng.standard_normal(m))
        D = np.array([[coframes[i](p, frame_vector(p, j)) for j in range(m)] for i in range(m)])
        dual = max(dual, np.max(np.abs(D - np.eye(m))))
        for i in range(m):
            T = exterior_derivative_tensor(coframes[i], p, "analytic")[:m, :m]
            drho = max(drho, np.max(np.abs(T - C[:, :, i])))
            T = exterior_derivative_tensor(coframes[i], p, "fd")[:m, :m]
            drho_fd = max(drho_fd, np.max(np.abs(T - C[:, :, i])))
        W = omS.coeffs(p)
        dth = max(dth, np.max(np.abs(exterior_derivative_tensor(theta, p, "analytic") + W)))
        dth_fd = max(dth_fd, np.max(np.abs(exterior_derivative_tensor(theta, p, "fd") + W)))
        dom = max(dom, np.max(np.abs(exterior_derivative_tensor(omS, p, "analytic"))))
        dom_fd = max(dom_fd, np.max(np.abs(exterior_derivative_tensor(omS, p, "fd"))))
        fval, fd_ = conformal_scalar(I)
        num = fd_frame_derivative(lambda q: np.array(fval(q)), p)
        fder = max(fder, np.max(np.abs(num - fd_(p))) / max(1e-300, np.max(np.abs(num))))
        contact = max(contact, np.max(np.abs(connection_A(p) - connection_A_contact(p))))
    return [
        _bound("coframe_frame_duality", n, dual, 1e-12, 2),
        _bound("d_coframe_structure_equations", n, drho, 1e-10, 2),
        _bound("d_coframe_structure_equations_fd", n, drho_fd, 1e-10, 2),
        _bound("d_theta_S_plus_omega_S", n, dth, 1e-9, 2),
        _bound("d_theta_S_plus_omega_S_fd", n, dth_fd, 1e-9, 2),
        _bound("d_omega_S_vanishes", n, dom, 1e-9, 2),
        _bound("d_omega_S_vanishes_fd", n, dom_fd, 1e-9, 2),
        _bound("conformal_factor_derivative_vs_fd", n, fder, 1e-6),
        _bound("connection_coframe_vs_contact", n, contact, 1e-12),
    ]


# ---------------------------------------------------------------------------
# truncation


def _uprime_points(n, count, rng, gmin=1e-2):
    """Random points with ``min |g_a| >= gmin`` (inside U')."""
    pts = []
    z = kit(n).z
    while len(pts) < count:
        s, u = _random_points(n, 1, rng)
        g = (son.ad_matrix(s[0]) @ u[0])[z]
        if np.min(np.abs(g)) >= gmin:
            pts.append(PhasePoint(s[0], u[0]))
    return pts


def truncation_battery(n: int, rng: np.random.Generator, points: int = 1000) -> list[CheckResult]:
    k = kit(n)
    m = k.m
    I = _anisotropic(n, rng)
    s, u = _random_points(n, points, rng)
    Imat = np.broadcast_to(I.matrix, (points, m, m))
    a1, b1, r1 = field_batch(s, u, Imat, FormTag.OMEGA_NH, check=True)
    a2, b2, r2 = field_batch(s, u, Imat, FormTag.OMEGA_TILDE, check=True)
    out = [
        _bound("xnh_same_field_omega_nh_vs_omega_tilde", n,
               max(np.max(np.abs(a1 - a2)), np.max(np.abs(b1 - b2))), 1e-10, 3),
        _bound("xnh_base_part_equals_u", n, np.max(np.abs(a1 - u)), 1e-10, 3),
        _bound("xnh_linear_solve_residual", n, max(np.max(r1), np.max(r2)), 1e-10),
    ]
    om_t = compose_forms(FormTag.OMEGA_TILDE, I)
    om_nh = compose_forms(FormTag.OMEGA_NH, I)
    mm_t = mm_nh = djx = contr = 0.0
    y_idx = np.arange(m)[k.y]
    for i in range(points):
        p = PhasePoint(s[i], u[i])
        dJ = dJH_matrix(p, I)  # [alpha, frame]
        Wt, Wn = om_t.coeffs(p), om_nh.coeffs(p)
        # generator of the H action in frame coordinates: E_{Y_alpha}
        mm_t = max(mm_t, np.max(np.abs(Wt[y_idx] - dJ)))
        mm_nh = max(mm_nh, np.max(np.abs(Wn[y_idx] - dJ)))
        X = np.concatenate([son.ad_matrix(s[i]) @ a1[i], b1[i]])
        djx = max(djx, np.max(np.abs(dJ @ X)))
        contr = max(contr, np.max(np.abs(X @ (Wn - Wt))))
    out += [
        _bound("momentum_map_identity_omega_tilde", n, mm_t, 1e-9, 4),
        _witness("momentum_map_identity_fails_for_omega_nh", n, mm_nh, 1e-4, 4),
        _bound("dJH_along_xnh", n, djx, 1e-9),
        _bound("xnh_contracts_equally_with_omega_nh_and_omega_tilde", n, contr, 1e-10),
    ]
    sig = eq = eqx = eqx_jk = 0.0
    tjk = compose_forms(FormTag.TRUNCATED_JK, I)
    jk = compose_forms(FormTag.JK, I)
    lc = compose_forms(FormTag.LCURV, I)
    for p in _uprime_points(n, 100, rng):
        fs = solve_xnh(p, I)
        X = frame_coords(p, fs.X)
        sig = max(sig, np.max(np.abs(sigma_connection(p, fs.X))))
        T, L = tjk.coeffs(p), lc.coeffs(p)
        eq = max(eq, np.max(np.abs(T - L)))
        eqx = max(eqx, np.max(np.abs(X @ T - X @ L)))
        eqx_jk = max(eqx_jk, np.max(np.abs(X @ jk.coeffs(p) - X @ L)))
    out.append(_bound("sigma_annihilates_xnh", n, sig, 1e-12, 10))
    if n == 3:
        out.append(_bound("truncated_jk_equals_lcurv", n, eq, 1e-10, 10))
    else:
        out.append(_bound("truncated_jk_and_lcurv_agree_on_xnh", n, eqx, 1e-10, 10))
    out.append(_bound("jk_and_lcurv_agree_on_xnh", n, eqx_jk, 1e-10))
    try:
        p = PhasePoint(np.eye(n), np.eye(m)[y_idx[0]])
        sigma_connection(p, np.zeros(2 * m))
        guarded = 0.0
    except NearEquilibriumError:
        guarded = 1.0
    out.append(_witness("near_equilibrium_guard_raises", n, guarded, 0.5))
    return out


# ---------------------------------------------------------------------------
# hamiltonization and reduction


def hamiltonization_battery(n: int, rng: np.random.Generator, points: int = 50) -> list[CheckResult]:
    m = son.algebra_dim(n)
    dim_h = m - (n - 1)
    out = []
    I1 = InertiaTensor.identity(n)
    hom = hom0 = 0.0
    for _ in range(points):
        p = level_set_point(n, I1, rng.standard_normal(dim_h), rng)
        hom = max(hom, closedness_verdict(p, I1, "OMEGA_TILDE", True).max_residual)
        p0 = level_set_point(n, I1, np.zeros(dim_h), rng)
        hom0 = max(hom0, closedness_verdict(p0, I1, "OMEGA_TILDE", True).max_residual)
    out.append(_bound("homogeneous_omega_tilde_closed_on_level_sets", n, hom, 1e-8, 7))
    out.append(_bound("homogeneous_omega_tilde_closed_on_zero_level", n, hom0, 1e-8))

    # straight rolling of the homogeneous ball
    s0, u0 = _random_points(n, 3, rng)
    s0 = np.concatenate([np.eye(n)[None], s0])
    u0 = np.concatenate([np.eye(m)[None, 0], u0])
    trajs = split_batch(integrate_batch(s0, u0, I1, 10.0, 1e-3), I1, 1e-3)
    col = max(collinearity_residual(contact_path(tr)) for tr in trajs)
    du = max(float(np.max(np.abs(tr.u - tr.u[0]))) for tr in trajs)
    out.append(_bound("homogeneous_contact_path_collinear", n, col, 1e-8, 7))
    out.append(_bound("homogeneous_body_velocity_constant", n, du, 1e-8))

    f_exact = 2.0 ** (-(n - 1) / 2)
    fh = max(abs(conformal_factor(son.random_rotation(n, rng), I1) - f_exact) for _ in range(20))
    out.append(_bound("conformal_factor_homogeneous_value", n, fh, 1e-14, 8))
    I = _anisotropic(n, rng)
    finv = 0.0
    for _ in range(100):
        s = son.random_rotation(n, rng)
        h = son.random_stabilizer(n, rng)
        finv = max(finv, abs(conformal_factor(h @ s, I) - conformal_factor(s, I)))
    out.append(_bound("conformal_factor_H_invariant", n, finv, 1e-12, 8))

    if n == 3:
        Ia = InertiaTensor.diagonal(3, 1.0 + rng.random(3))
        worst = sep = 0.0
        tilde_unres = np.inf
        for _ in range(points):
            p = level_set_point(3, Ia, rng.standard_normal(dim_h), rng)
            worst = max(worst, closedness_verdict(p, Ia, "F_OMEGA_TILDE", True).max_residual)
            tilde_unres = min(tilde_unres, closedness_verdict(p, Ia, "OMEGA_TILDE", False).max_residual)
        sep = tilde_unres / max(worst, 1e-300)
        out.append(_bound("f_omega_tilde_closed_on_level_sets", 3, worst, 1e-6, 8))
        out.append(_witness("f_omega_tilde_separation_from_omega_tilde", 3, sep, 100.0))
        w = nonclosedness_witness(Ia, np.random.default_rng(rng.integers(2**63)), "OMEGA_NH",
                                  samples=10_000, threshold=1e-3)
        out.append(_witness("omega_nh_not_closed_witness", 3, w.max_residual, 1e-3, 9,
                            f"{w.samples} samples"))

    for label, lam in (("generic", rng.standard_normal(dim_h)), ("zero", np.zeros(dim_h))):
        audit = reduced_dimension_audit(n, lam, _anisotropic(n, rng), rng)
        out.append(_bound(f"reduced_dimension_{label}_level", n,
                          abs(audit.reduced_dim - audit.measured_reduced_dim), 0.0, 12,
                          f"formula {audit.reduced_dim}, measured {audit.measured_reduced_dim}"))
    return out


# ---------------------------------------------------------------------------
# trajectories and the constrained oracle


def _equilibrium_starts(n, rng, count=3):
    """Initial points in E: genuine relative equilibria (anisotropic diagonal inertia)
    and arbitrary ``g = 0`` points of the homogeneous ball."""
    m = son.algebra_dim(n)
    y0 = np.arange(m)[kit(n).y][0]
    Idiag = InertiaTensor.diagonal(n, 1.0 + rng.random(m))
    starts = [(PhasePoint(np.eye(n), np.eye(m)[y0]), Idiag)]
    for _ in range(count):
        starts.append((relative_equilibrium_point(n, Idiag, rng, speed=1.0 + rng.random()), Idiag))
    I1 = InertiaTensor.identity(n)
    for _ in range(count):
        s = son.random_rotation(n, rng)
        w = rng.standard_normal(m)
        w[kit(n).z] = 0.0
        starts.append((PhasePoint(s, son.ad_matrix(s).T @ w), I1))
    return starts


def oracle_battery(n: int, rng: np.random.Generator, scenarios: int = 20, T: float = 10.0,
                   dt: float = 1e-3) -> list[CheckResult]:
    m = son.algebra_dim(n)
    k = kit(n)
    Is = [_anisotropic(n, rng) for _ in range(scenarios)]
    s0, u0 = _random_points(n, scenarios, rng)
    eq = _equilibrium_starts(n, rng)
    s_all = np.concatenate([s0, np.stack([p.s for p, _ in eq])])
    u_all = np.concatenate([u0, np.stack([p.u for p, _ in eq])])
    I_all = Is + [I for _, I in eq]

    out_fine = integrate_batch(s_all, u_all, I_all, T, dt)
    trajs = split_batch(out_fine, I_all, dt)
    main, eqt = trajs[:scenarios], trajs[scenarios:]
    dH = max(float(np.max(np.abs(tr.hamiltonian() - tr.hamiltonian()[0]))) for tr in main)
    dJ = max(float(np.max(np.abs(tr.momentum() - tr.momentum()[0]))) for tr in main)
    res = [
        _bound("energy_drift", n, dH, 1e-8, 5),
        _bound("momentum_drift", n, dJ, 1e-8, 5),
        _bound("orthogonality_after_steps", n, out_fine["orthogonality_drift"], 1e-12),
    ]
    # order from differences of final states across dt halvings
    finals = [np.concatenate([out_fine["s"][-1, :scenarios].reshape(scenarios, -1),
                              out_fine["u"][-1, :scenarios]], axis=1)]
    for h in (2 * dt, 4 * dt):
        o = integrate_batch(s0, u0, Is, T, h, stride=int(round(T / h)))
        finals.append(np.concatenate([o["s"][-1].reshape(scenarios, -1), o["u"][-1]], axis=1))
    e_coarse = np.max(np.abs(finals[2] - finals[1]))
    e_fine = np.max(np.abs(finals[1] - finals[0]))
    order = float(np.log2(e_coarse / e_fine))
    res.append(CheckResult("convergence_order", n, order, 3.5, bool(order >= 3.5), 5, "minimum",
                           f"differences {e_coarse:.2e}, {e_fine:.2e}"))

    g_eq = max(float(np.max(np.abs(tr.g()))) for tr in eqt)
    res.append(_bound("relative_equilibria_invariant", n, g_eq, 1e-8, 11,
                      f"{len(eqt)} starts in E"))

    full0 = [initial_full_state(s0[i], u0[i]) for i in range(scenarios)]
    Ih = InertiaTensor.identity(n)
    full0.append(initial_full_state(s0[0], u0[0]))
    full = integrate_constrained(full0, Is + [Ih], T, dt)
    dev = max(max(float(np.max(np.abs(f.s - c.s))), float(np.max(np.abs(f.u - c.u))))
              for f, c in zip(full[:scenarios], main))
    res.append(_bound("oracle_projection_deviation", n, dev, 1e-6, 6, f"{scenarios} scenarios"))
    res.append(_bound("oracle_constraint_projection", n, max(f.max_projection for f in full), 1e-9))
    eF = 0.0
    for f, I in zip(full, Is + [Ih]):
        E = 0.5 * np.einsum("ti,ij,tj->t", f.u, I.matrix, f.u) + 0.5 * np.sum(f.xdot**2, axis=1)
        eF = max(eF, float(np.max(np.abs(E - E[0]))))
    res.append(_bound("oracle_energy_drift", n, eF, 1e-8))
    res.append(_bound("oracle_homogeneous_multipliers_vanish", n, float(np.max(np.abs(full[-1].lam))), 1e-9))
    return res


# ---------------------------------------------------------------------------
# suites

SUITES = {
    "algebra": [algebra_battery],
    "forms": [forms_battery],
    "truncation": [truncation_battery],
    "hamiltonization": [hamiltonization_battery],
    "oracle": [oracle_battery],
}
SUITES["all"] = [b for name in ("algebra", "forms", "truncation", "hamiltonization", "oracle")
                 for b in SUITES[name]]


@dataclass
class SuiteReport:
    suite: str
    ns: list
    seed: int
    results: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> dict:
        return {"suite": self.suite, "n": list(self.ns), "seed": self.seed,
                "passed": self.passed, "elapsed_seconds": round(self.elapsed, 3),
                "checks": [asdict(r) for r in self.results]}


def run_suite(suite: str, ns=(3, 4), seed: int = 0) -> SuiteReport:
    """Run every battery of ``suite`` for each ``n``; batteries get independent seeded streams."""
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    report = SuiteReport(suite, list(ns), seed)
    start = time.perf_counter()
    for battery in SUITES[suite]:
        for n in ns:
            rng = np.random.default_rng([seed, n, _BATTERY_IDS[battery.__name__]])
            log.info("running %s for n=%d", battery.__name__, n)
            report.results.extend(battery(n, rng))
    report.elapsed = time.perf_counter() - start
    return report


_BATTERY_IDS = {b.__name__: i for i, b in enumerate(SUITES["all"])}
