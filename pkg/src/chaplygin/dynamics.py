"""Nonholonomic vector field, Lie-group RK4 integration and relative equilibria.

``X_nh`` is obtained pointwise from ``i(X) Omega = dH_c`` by assembling the
frame Gram matrix of ``Omega`` (``Omega_nh`` or ``Omega_tilde``) and solving
the ``2m x 2m`` system.  The integrator is a Munthe-Kaas RK4 scheme in the
chart ``s = s_k exp(theta)`` with ``theta' = dexp^-1_{-theta}(a)`` truncated after
the double commutator (enough for order four).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ball import InertiaTensor, PhasePoint
from .forms import (
    FormTag,
    TangentVectorTS,
    _dw,
    frame_coords,
    jk_coeffs,
    kit,
    lcurv_coeffs,
    local_data,
    omega_S_coeffs,
)
from .son import ad_matrix, group_exp, hat

log = logging.getLogger(__name__)

__all__ = [
    "FieldSample",
    "IntegrationGuardError",
    "RelativeEquilibriumReport",
    "ReparamReport",
    "SingularFormError",
    "Trajectory",
    "collinearity_residual",
    "compare_reparametrized",
    "contact_path",
    "dH_frame",
    "dJH_directional",
    "dJH_matrix",
    "field_batch",
    "integrate",
    "integrate_batch",
    "relative_equilibria_check",
    "relative_equilibrium_point",
    "reparam_consistency",
    "solve_xnh",
    "split_batch",
]

DYNAMIC_FORMS = (FormTag.OMEGA_NH, FormTag.OMEGA_TILDE)


class SingularFormError(RuntimeError):
    """Gram matrix of the almost-symplectic form is numerically singular."""


class IntegrationGuardError(RuntimeError):
    """Energy changed by more than the per-step guard; the step is too large."""


@dataclass(frozen=True)
class FieldSample:
    X: TangentVectorTS
    residual: float
    rhs_norm: float


def _form_tag(form) -> FormTag:
    tag = FormTag(form.upper() if isinstance(form, str) else form)
    if tag not in DYNAMIC_FORMS:
        raise ValueError(f"dynamics needs OMEGA_NH or OMEGA_TILDE, got {tag.value}")
    return tag


def _gram(k, tag, R, RI, w, wt):
    W = omega_S_coeffs(k, R, RI, w, wt)
    if tag is FormTag.OMEGA_NH:
        return W - jk_coeffs(k, R, RI, w, wt)
    return W - lcurv_coeffs(k, R, RI, w, wt)


def _dH(k, Imat, u, R, w):
    """Frame derivatives of ``H_c = <u, I u>/2 + |g|^2/2``."""
    g = w[..., k.z]
    adw = k.contract(w, k.ad_flat)  # [..., l, k]
    dE = (adw[..., :, k.z] @ g[..., None])[..., 0]
    Iu = (Imat @ u[..., None])[..., 0]
    dV = Iu + (g[..., None, :] @ R[..., k.z, :])[..., 0, :]
    return np.concatenate([dE, dV], axis=-1)


def dH_frame(p: PhasePoint, I: InertiaTensor) -> np.ndarray:
    k = kit(p.n)
    R, RI, w, wt = local_data(p.s, p.u, I.matrix)
    return _dH(k, I.matrix, p.u, R, w)


def field_batch(s, u, Imat, form=FormTag.OMEGA_NH, check: bool = False):
    """``X_nh`` at a batch of points; returns base part ``a``, fiber part ``b``
    (both ``[..., m]`` body coefficients) and the relative solve residual."""
    tag = _form_tag(form)
    n = s.shape[-1]
    k = kit(n)
    R, RI, w, wt = local_data(s, u, Imat)
    W = _gram(k, tag, R, RI, w, wt)
    rhs = _dH(k, Imat, u, R, w)
    # i(X) Omega = dH  <=>  W^T X = dH
    WT = np.swapaxes(W, -1, -2)
    X = np.linalg.solve(WT, rhs[..., None])[..., 0]
    resid = None
    if check:
        r = np.einsum("...ij,...j->...i", WT, X) - rhs
        resid = np.linalg.norm(r, axis=-1) / (1.0 + np.linalg.norm(rhs, axis=-1))
    m = k.m
    a = np.einsum("...ji,...j->...i", R, X[..., :m])
    return a, X[..., m:], resid


def solve_xnh(p: PhasePoint, I: InertiaTensor, form=FormTag.OMEGA_NH) -> FieldSample:
    """Solve ``i(X) Omega = dH_c`` at ``p`` for ``Omega`` in {OMEGA_NH, OMEGA_TILDE}."""
    tag = _form_tag(form)
    k = kit(p.n)
    R, RI, w, wt = local_data(p.s, p.u, I.matrix)
    W = _gram(k, tag, R, RI, w, wt)
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularFormError(f"{tag.value} Gram matrix singular (condition number {cond:.3e})")
    rhs = _dH(k, I.matrix, p.u, R, w)
    X = np.linalg.solve(W.T, rhs)
    resid = float(np.linalg.norm(W.T @ X - rhs))
    m = k.m
    return FieldSample(TangentVectorTS(R.T @ X[:m], X[m:]), resid, float(np.linalg.norm(rhs)))


def dJH_directional(p: PhasePoint, v, I: InertiaTensor) -> np.ndarray:
    """Derivative of ``J_H`` (``Y``-block coefficients) along ``v``."""
    k = kit(p.n)
    R, RI, w, wt = local_data(p.s, p.u, I.matrix)
    _, dwt = _dw(k, R, RI, w, wt)
    c = frame_coords(p, v) if isinstance(v, TangentVectorTS) else np.asarray(v, dtype=float)
    return c @ dwt[:, k.y]


def dJH_matrix(p: PhasePoint, I: InertiaTensor) -> np.ndarray:
    """``dJ_H`` as a ``dim h x 2m`` matrix acting on frame coordinates."""
    k = kit(p.n)
    R, RI, w, wt = local_data(p.s, p.u, I.matrix)
    _, dwt = _dw(k, R, RI, w, wt)
    return dwt[:, k.y].T


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    """Samples ``(t_k, s_k, u_k)`` of one integral curve.

    For time-reparametrized runs ``t`` is the new time and ``clock`` the
    original time along the curve.
    """

    t: np.ndarray
    s: np.ndarray
    u: np.ndarray
    inertia: InertiaTensor
    dt: float
    form: str
    reparam: bool = False
    clock: np.ndarray | None = None
    orthogonality_drift: float = 0.0
    integrator: str = "munthe-kaas-rk4"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.s.shape[-1]

    def __len__(self) -> int:
        return len(self.t)

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(self.s[i], self.u[i])

    @property
    def samples(self):
        return [(float(t), self.point(i)) for i, t in enumerate(self.t)]

    def hamiltonian(self) -> np.ndarray:
        k = kit(self.n)
        R, _, w, _ = local_data(self.s, self.u, self.inertia.matrix)
        return 0.5 * np.einsum("...i,ij,...j->...", self.u, self.inertia.matrix, self.u) \
            + 0.5 * np.sum(w[..., k.z] ** 2, axis=-1)

    def momentum(self) -> np.ndarray:
        k = kit(self.n)
        _, _, _, wt = local_data(self.s, self.u, self.inertia.matrix)
        return wt[..., k.y]

    def g(self) -> np.ndarray:
        k = kit(self.n)
        _, _, w, _ = local_data(self.s, self.u, self.inertia.matrix)
        return w[..., k.z]

    def field(self, form=None):
        """``X_nh`` (unscaled) at every sample: ``(a, b)`` arrays."""
        a, b, _ = field_batch(self.s, self.u, self.inertia.matrix, form or self.form)
        return a, b


def _bracket_coeffs(k, x, y):
    # [x, y]_c = C[i, j, c] x_i y_j
    Cx = (x @ k.C.reshape(k.m, k.m * k.m)).reshape(x.shape[:-1] + (k.m, k.m))
    return (y[..., None, :] @ Cx)[..., 0, :]


def _dexpinv(k, theta, a):
    # theta' for s = s0 exp(theta), s' = s a
    t1 = _bracket_coeffs(k, theta, a)
    return a + 0.5 * t1 + _bracket_coeffs(k, theta, t1) / 12.0


def _stack_inertia(I, batch):
    if isinstance(I, InertiaTensor):
        return np.broadcast_to(I.matrix, (batch,) + I.matrix.shape)
    mats = [x.matrix for x in I]
    if len(mats) != batch:
        raise ValueError("one inertia per initial condition")
    return np.stack(mats)


def _hc_batch(k, s, u, Imat):
    w = (ad_matrix(s)[:, k.z, :] @ u[..., None])[..., 0]
    Iu = (Imat @ u[..., None])[..., 0]
    return 0.5 * np.sum(u * Iu, axis=-1) + 0.5 * np.sum(w**2, axis=-1)


def integrate_batch(s0, u0, I, T: float, dt: float, form=FormTag.OMEGA_NH,
                    reparam: bool = False, guard: float = 1e-3, stride: int = 1):
    """Integrate a batch of initial conditions simultaneously.

    Returns a dict with ``t [N]``, ``s [N, B, n, n]``, ``u [N, B, m]``,
    ``clock [N, B]`` (original time, equal to ``t`` unless ``reparam``) and
    ``orthogonality_drift``.  ``guard`` bounds the per-step relative change of
    ``H_c``; exceeding it raises `IntegrationGuardError`.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    tag = _form_tag(form)
    s = np.array(s0, dtype=float)
    u = np.array(u0, dtype=float)
    B, n = s.shape[0], s.shape[-1]
    k = kit(n)
    Imat = np.ascontiguousarray(_stack_inertia(I, B))
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ValueError(f"T = {T} is not a multiple of dt = {dt}")

    def rhs(s_stage, u_stage, theta):
        a, b, _ = field_batch(s_stage, u_stage, Imat, tag)
        if reparam:
            RZ = ad_matrix(s_stage)[:, k.z, :]
            finv = np.sqrt(np.linalg.det(Imat + np.swapaxes(RZ, -1, -2) @ RZ))
            a, b = a * finv[:, None], b * finv[:, None]
        else:
            finv = np.ones(B)
        return _dexpinv(k, theta, a), b, finv

    nsamp = steps // stride + 1
    ts = np.empty(nsamp)
    S = np.empty((nsamp, B, n, n))
    U = np.empty((nsamp, B, k.m))
    clock = np.empty((nsamp, B))
    ts[0], S[0], U[0], clock[0] = 0.0, s, u, 0.0
    clk = np.zeros(B)
    H = _hc_batch(k, s, u, Imat)
    drift = float(np.max(np.abs(np.swapaxes(s, -1, -2) @ s - np.eye(n))))
    zero = np.zeros_like(u)
    for step in range(1, steps + 1):
        k1t, k1u, c1 = rhs(s, u, zero)
        th = 0.5 * dt * k1t
        k2t, k2u, c2 = rhs(s @ group_exp(hat(th, n)), u + 0.5 * dt * k1u, th)
        th = 0.5 * dt * k2t
        k3t, k3u, c3 = rhs(s @ group_exp(hat(th, n)), u + 0.5 * dt * k2u, th)
        th = dt * k3t
        k4t, k4u, c4 = rhs(s @ group_exp(hat(th, n)), u + dt * k3u, th)
        theta = dt / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)
        s = s @ group_exp(hat(theta, n))
        u = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        clk = clk + dt / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)
        dev = float(np.max(np.abs(np.swapaxes(s, -1, -2) @ s - np.eye(n))))
        drift = max(drift, dev)
        if dev > 1e-13:
            # polar retraction back onto SO(n)
            U_, _, Vt = np.linalg.svd(s)
            s = U_ @ Vt
        Hn = _hc_batch(k, s, u, Imat)
        jump = np.abs(Hn - H)
        if np.any(jump > guard * np.maximum(H, 1e-300)) and np.any(jump > 1e-14):
            i = int(np.argmax(jump / np.maximum(H, 1e-300)))
            raise IntegrationGuardError(
                f"step {step}: |dH_c| = {jump[i]:.3e} exceeds guard {guard:g} * H_c = "
                f"{guard * H[i]:.3e}; reduce dt (currently {dt:g})")
        H = Hn
        if step % stride == 0:
            j = step // stride
            ts[j], S[j], U[j], clock[j] = step * dt, s, u, clk
    return {"t": ts, "s": S, "u": U, "clock": clock if reparam else None,
            "orthogonality_drift": drift}


def integrate(p0: PhasePoint, I: InertiaTensor, T: float, dt: float, form=FormTag.OMEGA_NH,
              reparam: bool = False, guard: float = 1e-3, stride: int = 1) -> Trajectory:
    """Integrate ``X_nh`` (or ``X_nh / f`` when ``reparam``) from ``p0``."""
    tag = _form_tag(form)
    out = integrate_batch(p0.s[None], p0.u[None], I, T, dt, tag, reparam, guard, stride)
    clock = out["clock"][:, 0] if reparam else None
    return Trajectory(t=out["t"], s=out["s"][:, 0], u=out["u"][:, 0], inertia=I, dt=dt,
                      form=tag.value, reparam=reparam, clock=clock,
                      orthogonality_drift=out["orthogonality_drift"])


def split_batch(out: dict, I, dt: float, form=FormTag.OMEGA_NH, reparam: bool = False):
    """Turn `integrate_batch` output into a list of `Trajectory` objects."""
    B = out["s"].shape[1]
    Is = [I] * B if isinstance(I, InertiaTensor) else list(I)
    tag = _form_tag(form)
    return [Trajectory(t=out["t"], s=out["s"][:, i], u=out["u"][:, i], inertia=Is[i], dt=dt,
                       form=tag.value, reparam=reparam,
                       clock=None if out["clock"] is None else out["clock"][:, i],
                       orthogonality_drift=out["orthogonality_drift"])
            for i in range(B)]


def contact_path(traj: Trajectory, x0=None) -> np.ndarray:
    """Contact point path ``x(t) = x0 + int sum_a g_a e_a dt``.

    Uses the corrected trapezoid rule with ``g' = (Ad(s) u')_Z``, fourth order in dt.
    """
    k = kit(traj.n)
    R, _, w, _ = local_data(traj.s, traj.u, traj.inertia.matrix)
    g = w[:, k.z]
    _, b = traj.field()
    gdot = np.einsum("tij,tj->ti", R, b)[:, k.z]
    h = np.diff(traj.t)[:, None]
    incr = 0.5 * h * (g[1:] + g[:-1]) + h**2 / 12.0 * (gdot[:-1] - gdot[1:])
    x = np.zeros((len(traj), traj.n - 1)) if x0 is None else np.tile(np.asarray(x0, float), (len(traj), 1))
    x[1:] += np.cumsum(incr, axis=0)
    return x


def collinearity_residual(x: np.ndarray) -> float:
    """Max distance of the points ``x`` from their best-fit straight line."""
    c = x - x.mean(axis=0)
    _, _, Vt = np.linalg.svd(c, full_matrices=False)
    d = Vt[0]
    perp = c - np.outer(c @ d, d)
    return float(np.max(np.linalg.norm(perp, axis=1)))


# ---------------------------------------------------------------------------
# relative equilibria


@dataclass(frozen=True)
class RelativeEquilibriumReport:
    in_E: bool
    max_g: float
    g: np.ndarray
    fiber_speed: float  # |u'| of X_nh; zero at genuine relative equilibria

    def __bool__(self):
        return self.in_E


def relative_equilibria_check(p: PhasePoint, I: InertiaTensor, tol: float = 1e-10) -> RelativeEquilibriumReport:
    """``in_E`` iff ``max_a |g_a(p)| <= tol``; the witness carries ``g`` and ``|u'|``."""
    k = kit(p.n)
    w = local_data(p.s, p.u, I.matrix)[2]
    g = w[k.z]
    X = solve_xnh(p, I).X
    mg = float(np.max(np.abs(g)))
    return RelativeEquilibriumReport(mg <= tol, mg, g, float(np.linalg.norm(X.b)))


def relative_equilibrium_point(n: int, I: InertiaTensor, rng: np.random.Generator,
                               speed: float = 1.0) -> PhasePoint:
    """A random point with ``g = 0`` and ``X_nh`` vertical.

    Picks an eigenvector ``e`` of ``I`` with a kernel (for diagonal ``I`` a basis
    element) and ``s`` whose Poisson vector ``s^T e_n`` lies in ``ker e``, so the
    space angular velocity ``Ad(s) e`` lies in ``h`` and ``[I e, e] = 0``.
    """
    from .son import random_rotation, vee

    vals, vecs = np.linalg.eigh(I.matrix)
    for j in rng.permutation(len(vals)):
        e = vecs[:, j]
        E = hat(e, n)
        IE = hat(I.matrix @ e, n)
        if np.max(np.abs(vee(IE @ E - E @ IE))) > 1e-12:
            continue
        _, sv, Vt = np.linalg.svd(E)
        null = Vt[sv < 1e-10 * max(1.0, sv[0])]
        if len(null) == 0:
            continue
        gamma = null.T @ rng.standard_normal(len(null))
        gamma /= np.linalg.norm(gamma)
        # rows of s: an orthonormal complement of gamma, then gamma itself
        q = np.linalg.qr(np.column_stack([gamma, random_rotation(n, rng)[:, : n - 1]]))[0]
        s = np.vstack([q[:, 1:].T, gamma])
        if np.linalg.det(s) < 0:
            s[0] = -s[0]
        return PhasePoint(s, speed * e)
    raise ValueError("inertia has no eigenvector with a nontrivial kernel")


# ---------------------------------------------------------------------------
# time reparametrization


@dataclass(frozen=True)
class ReparamReport:
    max_path_deviation: float
    energy_drift_original: float
    energy_drift_reparam: float
    compared_samples: int
    passed: bool
    tol: float


def _hermite(t0, t1, y0, y1, d0, d1, t):
    h = t1 - t0
    x = (t - t0) / h
    h00 = 2 * x**3 - 3 * x**2 + 1
    h10 = x**3 - 2 * x**2 + x
    h01 = -2 * x**3 + 3 * x**2
    h11 = x**3 - x**2
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _interpolate(traj: Trajectory, a, b, tq: float) -> PhasePoint:
    i = int(np.clip(np.searchsorted(traj.t, tq) - 1, 0, len(traj) - 2))
    t0, t1 = traj.t[i], traj.t[i + 1]
    sdot0 = traj.s[i] @ hat(a[i], traj.n)
    sdot1 = traj.s[i + 1] @ hat(a[i + 1], traj.n)
    s = _hermite(t0, t1, traj.s[i], traj.s[i + 1], sdot0, sdot1, tq)
    u = _hermite(t0, t1, traj.u[i], traj.u[i + 1], b[i], b[i + 1], tq)
    return PhasePoint(s, u)


def compare_reparametrized(orig: Trajectory, rep: Trajectory, tol: float = 1e-6) -> ReparamReport:
    """Distance of each reparametrized sample from the original curve at the same original time.

    ``rep.clock`` carries the original time of every sample; the original
    trajectory is evaluated there by cubic Hermite interpolation.  Samples
    beyond the end of ``orig`` are skipped.
    """
    if rep.clock is None:
        raise ValueError("second trajectory is not time-reparametrized")
    a, b = orig.field()
    dev = 0.0
    count = 0
    for j in range(len(rep)):
        tq = rep.clock[j]
        if tq > orig.t[-1]:
            break
        q = _interpolate(orig, a, b, tq)
        d = max(np.max(np.abs(q.s - rep.s[j])), np.max(np.abs(q.u - rep.u[j])))
        dev = max(dev, float(d))
        count += 1
    e0 = float(np.max(np.abs(orig.hamiltonian() - orig.hamiltonian()[0])))
    e1 = float(np.max(np.abs(rep.hamiltonian() - rep.hamiltonian()[0])))
    return ReparamReport(dev, e0, e1, count, dev <= tol, tol)


def reparam_consistency(p0: PhasePoint, I: InertiaTensor, T: float, dt: float,
                        tol: float = 1e-6, form=FormTag.OMEGA_NH) -> ReparamReport:
    """Check that ``X_nh`` and ``X_nh / f`` trace the same curve from ``p0``."""
    orig = integrate(p0, I, T, dt, form)
    rep = integrate(p0, I, T, dt, form, reparam=True)
    return compare_reparametrized(orig, rep, tol)
