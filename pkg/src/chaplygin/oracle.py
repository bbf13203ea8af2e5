"""Brute-force ball on Q = SO(n) x R^(n-1) with explicit Lagrange multipliers.

Deliberately independent of the compressed machinery: brackets and frame
vectors are computed with plain matrix products, not with the structure
tensor or ``Ad`` minors.  Equations (body frame, ``s' = s u``):

    I u' + sum_a lam_a zeta_a = [I u, u]
    x''  - lam               = 0
    x''_a - <zeta_a, u'>     = <d/dt zeta_a, u>      (differentiated constraint)

with ``zeta_a = s^T Z_a s`` and the rolling constraint ``x'_a = <zeta_a, u>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ball import InertiaTensor
from .son import adapted_basis, algebra_dim, hat, vee

__all__ = [
    "ConstraintDriftError",
    "FullState",
    "FullTrajectory",
    "ProjectionReport",
    "compare_projection",
    "constraint_residual",
    "full_energy",
    "initial_full_state",
    "integrate_constrained",
    "multiplier_residual",
    "multiplier_solve",
]


class ConstraintDriftError(RuntimeError):
    """Velocity projection onto the constraint exceeded the allowed magnitude."""


@dataclass(frozen=True, eq=False)
class FullState:
    s: np.ndarray
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray

    @property
    def n(self) -> int:
        return self.s.shape[-1]


def _zeta(s):
    """Rows are body coefficients of ``s^T Z_a s``; works on batches of ``s``."""
    b = adapted_basis(s.shape[-1])
    Z = np.stack([b.matrices[i] for i in range(b.n_z)])
    st = np.swapaxes(s, -1, -2)
    return vee(st[..., None, :, :] @ Z @ s[..., None, :, :])


def _kin(s, u):
    """``<Ad(s^-1) Z_a, u>``, i.e. the rolling velocity ``x'`` demanded by the constraint."""
    return np.einsum("...aj,...j->...a", _zeta(s), u)


def constraint_residual(state: FullState) -> float:
    return float(np.max(np.abs(state.xdot - _kin(state.s, state.u)), initial=0.0))


def initial_full_state(s0, u0, x0=None) -> FullState:
    s0 = np.asarray(s0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    n = s0.shape[-1]
    x0 = np.zeros(n - 1) if x0 is None else np.asarray(x0, dtype=float)
    return FullState(s0, x0, u0, _kin(s0, u0))


def _euler_bracket(Imat, u, n):
    # [I u, u] via matrix commutator
    A, U = hat(np.einsum("...ij,...j->...i", Imat, u), n), hat(u, n)
    return vee(A @ U - U @ A)


def _zeta_rate(s, u, n):
    # d/dt (s^T Z s) = -[u, s^T Z s] for s' = s u; paired with u
    U = hat(u, n)
    b = adapted_basis(n)
    st = np.swapaxes(s, -1, -2)
    out = []
    for a in range(b.n_z):
        zb = st @ b.matrices[a] @ s
        dz = zb @ U - U @ zb
        out.append(np.einsum("...j,...j->...", vee(dz), u))
    return np.stack(out, axis=-1)


def _kkt(s, u, Imat):
    n = s.shape[-1]
    m, k = algebra_dim(n), n - 1
    Zr = _zeta(s)
    N = m + 2 * k
    K = np.zeros(s.shape[:-2] + (N, N))
    K[..., :m, :m] = Imat
    K[..., :m, m + k:] = np.swapaxes(Zr, -1, -2)
    K[..., m:m + k, m:m + k] = np.eye(k)
    K[..., m:m + k, m + k:] = -np.eye(k)
    K[..., m + k:, :m] = Zr
    K[..., m + k:, m:m + k] = -np.eye(k)
    rhs = np.concatenate([_euler_bracket(Imat, u, n), np.zeros(s.shape[:-2] + (k,)),
                          -_zeta_rate(s, u, n)], axis=-1)
    return K, rhs


def multiplier_solve(state: FullState, I: InertiaTensor):
    """Accelerations and multipliers ``(udot, xddot, lam)`` at a constrained state."""
    if constraint_residual(state) > 1e-6:
        raise ValueError("state is not on the rolling constraint")
    K, rhs = _kkt(state.s, state.u, I.matrix)
    if np.linalg.cond(K) > 1e14:
        raise np.linalg.LinAlgError("singular multiplier system")
    sol = np.linalg.solve(K, rhs)
    m, k = len(state.u), state.n - 1
    return sol[:m], sol[m:m + k], sol[m + k:]


def multiplier_residual(state: FullState, I: InertiaTensor, udot, xddot, lam, h: float = 1e-2):
    """Euler-Lagrange and differentiated-constraint residuals of a candidate solution.

    The constraint derivative is taken by finite differences along the
    motion, so this check does not share code with `multiplier_solve`.
    """
    n = state.n
    s, u = state.s, state.u
    M, U, Ud = hat(I.matrix @ u, n), hat(u, n), hat(I.matrix @ udot, n)
    b = adapted_basis(n)
    force = sum(lam[a] * (s.T @ b.matrices[a] @ s) for a in range(n - 1))
    el = Ud - (M @ U - U @ M) + force

    def kin_at(t):
        # any path with the right first derivative will do; along this one the
        # constraint velocity is a cubic in t, so the five-point stencil is exact
        return _kin(s + t * s @ U, u + t * udot)

    dkin = (8 * (kin_at(h) - kin_at(-h)) - (kin_at(2 * h) - kin_at(-2 * h))) / (12 * h)
    return {
        "euler_lagrange": float(np.max(np.abs(el))),
        "translation": float(np.max(np.abs(xddot - lam))),
        "constraint_rate": float(np.max(np.abs(xddot - dkin))),
    }


def full_energy(state: FullState, I: InertiaTensor) -> float:
    return 0.5 * float(state.u @ I.matrix @ state.u) + 0.5 * float(state.xdot @ state.xdot)


@dataclass
class FullTrajectory:
    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray
    lam: np.ndarray
    max_projection: float

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> FullState:
        return FullState(self.s[i], self.x[i], self.u[i], self.xdot[i])


def _rhs(s, x, u, xd, Imat):
    n = s.shape[-1]
    K, rhs = _kkt(s, u, Imat)
    sol = np.linalg.solve(K, rhs[..., None])[..., 0]
    m, k = u.shape[-1], n - 1
    return s @ hat(u, n), xd, sol[..., :m], sol[..., m:m + k], sol[..., m + k:]


def _polar(s):
    U, _, Vt = np.linalg.svd(s)
    return U @ Vt


def integrate_constrained(state0, I, T: float, dt: float, projection_guard: float = 1e-9,
                          stride: int = 1):
    """Ambient RK4 on ``(s, x, u, x')`` with polar retraction and velocity projection.

    ``state0`` may be a single `FullState` (returns a `FullTrajectory`) or a
    list of them with a matching list of inertias (returns a list).
    """
    single = isinstance(state0, FullState)
    states = [state0] if single else list(state0)
    Is = [I] * len(states) if isinstance(I, InertiaTensor) else list(I)
    for st in states:
        if constraint_residual(st) > 1e-9:
            raise ValueError("initial state violates the rolling constraint")
    s = np.stack([st.s for st in states]).astype(float)
    x = np.stack([st.x for st in states]).astype(float)
    u = np.stack([st.u for st in states]).astype(float)
    xd = np.stack([st.xdot for st in states]).astype(float)
    Imat = np.stack([i.matrix for i in Is])
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ValueError(f"T = {T} is not a multiple of dt = {dt}")
    nsamp = steps // stride + 1
    B, n, m = s.shape[0], s.shape[-1], u.shape[-1]
    S, X, U, XD = (np.empty((nsamp,) + a.shape) for a in (s, x, u, xd))
    L = np.empty((nsamp, B, n - 1))
    S[0], X[0], U[0], XD[0] = s, x, u, xd
    L[0] = _rhs(s, x, u, xd, Imat)[4]
    worst = 0.0
    for step in range(1, steps + 1):
        k1 = _rhs(s, x, u, xd, Imat)
        k2 = _rhs(s + 0.5 * dt * k1[0], x + 0.5 * dt * k1[1], u + 0.5 * dt * k1[2], xd + 0.5 * dt * k1[3], Imat)
        k3 = _rhs(s + 0.5 * dt * k2[0], x + 0.5 * dt * k2[1], u + 0.5 * dt * k2[2], xd + 0.5 * dt * k2[3], Imat)
        k4 = _rhs(s + dt * k3[0], x + dt * k3[1], u + dt * k3[2], xd + dt * k3[3], Imat)
        inc = [dt / 6.0 * (a + 2 * b + 2 * c + d) for a, b, c, d in zip(k1[:4], k2[:4], k3[:4], k4[:4])]
        s = _polar(s + inc[0])
        x, u, xd = x + inc[1], u + inc[2], xd + inc[3]
        target = _kin(s, u)
        proj = float(np.max(np.abs(target - xd)))
        worst = max(worst, proj)
        if proj > projection_guard:
            raise ConstraintDriftError(
                f"step {step}: velocity projection {proj:.3e} exceeds {projection_guard:g}")
        xd = target
        if step % stride == 0:
            j = step // stride
            S[j], X[j], U[j], XD[j] = s, x, u, xd
            L[j] = _rhs(s, x, u, xd, Imat)[4]
    t = np.arange(nsamp) * dt * stride
    trajs = [FullTrajectory(t, S[:, i], X[:, i], U[:, i], XD[:, i], L[:, i], worst) for i in range(B)]
    return trajs[0] if single else trajs


@dataclass(frozen=True)
class ProjectionReport:
    max_deviation: float
    max_s_deviation: float
    max_u_deviation: float
    passed: bool
    tol: float


def compare_projection(full: FullTrajectory, compressed, tol: float = 1e-6) -> ProjectionReport:
    """Max distance between the ``(s, u)`` samples of the two runs on a common grid."""
    if len(full.t) != len(compressed.t) or np.max(np.abs(full.t - compressed.t)) > 1e-9:
        raise ValueError("time grids of the two trajectories differ")
    ds = float(np.max(np.abs(full.s - compressed.s)))
    du = float(np.max(np.abs(full.u - compressed.u)))
    dev = max(ds, du)
    return ProjectionReport(dev, ds, du, dev <= tol, tol)
