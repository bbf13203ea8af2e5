"""Diagnostics for a single scenario run, trajectory tables and report files."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .dynamics import (
    Trajectory,
    collinearity_residual,
    compare_reparametrized,
    contact_path,
    dJH_matrix,
    integrate,
    solve_xnh,
)
from .forms import FormTag, compose_forms, frame_coords, kit, sigma_connection, NearEquilibriumError
from .oracle import compare_projection, initial_full_state, integrate_constrained
from .reduction import closedness_verdict
from .scenario import Scenario
from .son import adapted_basis

__all__ = ["REPORT_SCHEMA", "REPORT_VERSION", "run_scenario", "trajectory_table", "write_outputs"]

REPORT_SCHEMA = "chaplygin-run-report"
REPORT_VERSION = 1
STRAIGHT_LINE_TOL = 1e-8


def _f(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _order_estimate(sc: Scenario, p0, I, main: Trajectory) -> dict:
    """Observed order from final-state differences at dt, 2 dt and 4 dt over the
    longest prefix of the run that is a multiple of 4 dt."""
    steps = len(main) - 1
    usable = steps - steps % 4
    if usable == 0:
        return {"value": None, "window": 0.0, "note": "run shorter than four steps"}
    T = usable * sc.dt
    states = [np.concatenate([main.s[usable].ravel(), main.u[usable]])]
    for h in (2 * sc.dt, 4 * sc.dt):
        tr = integrate(p0, I, T, h, sc.form_tag, sc.reparam, stride=int(round(T / h)))
        states.append(np.concatenate([tr.s[-1].ravel(), tr.u[-1]]))
    coarse = float(np.max(np.abs(states[2] - states[1])))
    fine = float(np.max(np.abs(states[1] - states[0])))
    value = math.log2(coarse / fine) if coarse > 0 and fine > 0 else None
    return {"value": value, "window": T, "difference_coarse": coarse, "difference_fine": fine}


def _truncation_identities(traj: Trajectory, samples: int = 10) -> dict:
    I = traj.inertia
    k = kit(traj.n)
    y = np.arange(k.m)[k.y]
    om_t = compose_forms(FormTag.OMEGA_TILDE, I)
    om_nh = compose_forms(FormTag.OMEGA_NH, I)
    mm_t = mm_nh = contr = 0.0
    sig, in_u = 0.0, 0
    for i in np.linspace(0, len(traj) - 1, min(samples, len(traj))).astype(int):
        p = traj.point(i)
        dJ = dJH_matrix(p, I)
        Wt, Wn = om_t.coeffs(p), om_nh.coeffs(p)
        mm_t = max(mm_t, float(np.max(np.abs(Wt[y] - dJ))))
        mm_nh = max(mm_nh, float(np.max(np.abs(Wn[y] - dJ))))
        fs = solve_xnh(p, I, traj.form)
        X = frame_coords(p, fs.X)
        contr = max(contr, float(np.max(np.abs(X @ (Wn - Wt)))))
        try:
            sig = max(sig, float(np.max(np.abs(sigma_connection(p, fs.X)))))
            in_u += 1
        except NearEquilibriumError:
            pass
    return {
        "momentum_map_omega_tilde": mm_t,
        "momentum_map_omega_nh": mm_nh,
        "xnh_contraction_difference": contr,
        "sigma_of_xnh": sig if in_u else None,
        "sigma_samples_in_domain": in_u,
    }


def _closedness(p, I) -> dict:
    out = {}
    for form in ("OMEGA_NH", "OMEGA_TILDE", "F_OMEGA_TILDE"):
        out[form] = {
            "restricted": closedness_verdict(p, I, form, True).max_residual,
            "unrestricted": closedness_verdict(p, I, form, False).max_residual,
        }
    return out


def run_scenario(sc: Scenario):
    """Integrate the scenario and gather diagnostics; returns ``(trajectory, report)``.

    Raises `IntegrationGuardError` or `ConstraintDriftError` when a guard trips.
    """
    I = sc.inertia
    p0 = sc.initial_point
    main = integrate(p0, I, sc.T, sc.dt, sc.form_tag, sc.reparam)
    plain = integrate(p0, I, sc.T, sc.dt, sc.form_tag) if sc.reparam else main

    H = main.hamiltonian()
    J = main.momentum()
    g = plain.g()
    full = integrate_constrained(initial_full_state(p0.s, p0.u), I, sc.T, sc.dt)
    proj = compare_projection(full, plain)
    x = contact_path(plain)
    col = collinearity_residual(x)

    report = {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_VERSION,
        "scenario": sc.to_dict(),
        "samples": len(main),
        "drifts": {
            "H_c": float(np.max(np.abs(H - H[0]))),
            "J_H": [float(v) for v in np.max(np.abs(J - J[0]), axis=0)],
        },
        "orthogonality_drift": main.orthogonality_drift,
        "constraint": {
            "max_velocity_projection": full.max_projection,
            "contact_path_deviation": float(np.max(np.abs(full.x - x))),
        },
        "oracle": {
            "max_deviation": proj.max_deviation,
            "s_deviation": proj.max_s_deviation,
            "u_deviation": proj.max_u_deviation,
            "passed": proj.passed,
            "tolerance": proj.tol,
        },
        "closedness_at_start": _closedness(p0, I),
        "truncation": _truncation_identities(plain),
        "order_estimate": _order_estimate(sc, p0, I, main),
        "straight_line": {
            "collinearity_residual": col,
            "flag": bool(col <= STRAIGHT_LINE_TOL),
        },
        "relative_equilibrium": {
            "start_in_E": bool(np.max(np.abs(g[0])) <= 1e-10),
            "max_abs_g": float(np.max(np.abs(g))),
        },
        "reparametrization": None,
    }
    if sc.reparam:
        rr = compare_reparametrized(plain, main)
        report["reparametrization"] = {
            "max_path_deviation": rr.max_path_deviation,
            "compared_samples": rr.compared_samples,
            "passed": rr.passed,
            "final_original_time": float(main.clock[-1]),
        }
    return main, _clean(report)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _f(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def trajectory_table(traj: Trajectory) -> str:
    """CSV text: ``t``, ``s`` row-major, ``u``, ``H_c``, ``J_H`` and ``g`` columns."""
    n = traj.n
    b = adapted_basis(n)
    labels = [b.label(i) for i in range(b.dim)]
    header = (["t"] + [f"s{i + 1}{j + 1}" for i in range(n) for j in range(n)]
              + [f"u_{lab}" for lab in labels] + ["H_c"]
              + [f"J_{lab}" for lab in labels[b.n_z:]] + [f"g{a + 1}" for a in range(n - 1)])
    cols = np.column_stack([traj.t, traj.s.reshape(len(traj), -1), traj.u,
                            traj.hamiltonian(), traj.momentum(), traj.g()])
    lines = [",".join(header)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in cols]
    return "\n".join(lines) + "\n"


def write_outputs(traj: Trajectory, report: dict, out_dir, stem: str):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tpath = out_dir / f"{stem}.trajectory.csv"
    rpath = out_dir / f"{stem}.report.json"
    report = dict(report, trajectory_file=tpath.name)
    with open(tpath, "w", newline="\n") as fh:
        fh.write(trajectory_table(traj))
    with open(rpath, "w", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return tpath, rpath
