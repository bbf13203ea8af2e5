"""Physical model of the n-dimensional Chaplygin ball on TS = SO(n) x so(n).

Points of TS are left-trivialized: ``(s, u)`` with ``s' = s u``; ``u`` is the
body angular velocity, stored as adapted-basis coefficients.  The right
invariant frame ``xi_alpha(s) = Ad(s^-1) Y_alpha``, ``zeta_a(s) = Ad(s^-1) Z_a``
has coframe ``(rho, eta)``, so coframe values are the coefficients of the
space-frame vector ``Ad(s) u``.  Mass and radius are normalized to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .son import adapted_basis, ad_matrix, algebra_dim, hat, structure_constants

__all__ = [
    "CoframeSample",
    "InertiaTensor",
    "PhasePoint",
    "coframe_coeffs",
    "compressed_hamiltonian",
    "conformal_factor",
    "conformal_factor_derivative",
    "connection_A",
    "connection_A_contact",
    "metric_phi",
    "momentum_JH",
]


@dataclass(frozen=True, eq=False)
class InertiaTensor:
    """Symmetric positive definite operator on so(n) in adapted-basis coordinates."""

    n: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        m = algebra_dim(self.n)
        if mat.shape != (m, m):
            raise ValueError(f"inertia for so({self.n}) must be {m}x{m}, got {mat.shape}")
        if np.max(np.abs(mat - mat.T)) > 1e-13 * max(1.0, np.max(np.abs(mat))):
            raise ValueError("inertia must be symmetric")
        eig = np.linalg.eigvalsh(mat)
        if eig[0] <= 0:
            raise ValueError(f"inertia must be positive definite (min eigenvalue {eig[0]:.3g})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def identity(cls, n: int) -> InertiaTensor:
        return cls(n, np.eye(algebra_dim(n)))

    @classmethod
    def diagonal(cls, n: int, values) -> InertiaTensor:
        return cls(n, np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def principal3(cls, I1: float, I2: float, I3: float) -> InertiaTensor:
        """n = 3 principal moments, placed on the (Z1, Z2, Y3) diagonal in that order."""
        return cls(3, np.diag([I1, I2, I3]).astype(float))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, spread: float = 1.0) -> InertiaTensor:
        """Random SPD operator with eigenvalues in ``[1, 1 + spread]``."""
        m = algebra_dim(n)
        q, _ = np.linalg.qr(rng.standard_normal((m, m)))
        vals = 1.0 + spread * rng.random(m)
        mat = (q * vals) @ q.T
        return cls(n, 0.5 * (mat + mat.T))

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.matrix.shape[0])))

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Left-trivialized point ``(s, u)`` of TS; ``u`` holds adapted-basis coefficients."""

    s: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        u = np.asarray(self.u, dtype=float)
        n = s.shape[-1]
        if s.shape != (n, n) or u.shape != (algebra_dim(n),):
            raise ValueError(f"inconsistent phase point shapes {s.shape}, {u.shape}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def u_matrix(self) -> np.ndarray:
        return hat(self.u, self.n)

    def with_u(self, u) -> PhasePoint:
        return PhasePoint(self.s, u)


@dataclass(frozen=True)
class CoframeSample:
    """Coframe values at a point: ``l = rho(u)``, ``g = eta(u)`` and the same on ``I u``."""

    l: np.ndarray
    g: np.ndarray
    l_tilde: np.ndarray
    g_tilde: np.ndarray


def _split(n):
    b = adapted_basis(n)
    return b.z_slice, b.y_slice


def coframe_coeffs(p: PhasePoint, I: InertiaTensor) -> CoframeSample:
    z, y = _split(p.n)
    R = ad_matrix(p.s)
    w = R @ p.u
    wt = R @ (I.matrix @ p.u)
    return CoframeSample(l=w[y], g=w[z], l_tilde=wt[y], g_tilde=wt[z])


def connection_A(p: PhasePoint) -> np.ndarray:
    """Rolling connection ``A_s(u) = -sum_a eta^a(u) e_a`` (coframe route)."""
    z, _ = _split(p.n)
    return -(ad_matrix(p.s) @ p.u)[z]


def connection_A_contact(p: PhasePoint) -> np.ndarray:
    """Same connection through the contact point: ``-(Ad(s)u e_n)`` truncated to R^{n-1}."""
    space = p.s @ p.u_matrix @ p.s.T
    return -space[: p.n - 1, p.n - 1]


def compressed_hamiltonian(p: PhasePoint, I: InertiaTensor) -> float:
    A = connection_A(p)
    return 0.5 * float(p.u @ I.matrix @ p.u) + 0.5 * float(A @ A)


def momentum_JH(p: PhasePoint, I: InertiaTensor) -> np.ndarray:
    """``J_H = sum l~_alpha Y_alpha``, returned as coefficients on the ``Y`` block."""
    return coframe_coeffs(p, I).l_tilde


def momentum_JH_matrix(p: PhasePoint, I: InertiaTensor) -> np.ndarray:
    n = p.n
    coeffs = np.zeros(algebra_dim(n))
    coeffs[_split(n)[1]] = momentum_JH(p, I)
    return hat(coeffs, n)


def metric_phi(s, I: InertiaTensor) -> np.ndarray:
    """``Phi_s = I + A^* A`` as a matrix on body coefficients."""
    z, _ = _split(I.n)
    RZ = ad_matrix(np.asarray(s, dtype=float))[..., z, :]
    return I.matrix + np.swapaxes(RZ, -1, -2) @ RZ


def conformal_factor(s, I: InertiaTensor):
    """``f(s) = det(Phi_s)^(-1/2)``."""
    val = np.linalg.det(metric_phi(s, I)) ** -0.5
    return float(val) if np.ndim(val) == 0 else val


def conformal_factor_derivative(s, I: InertiaTensor) -> np.ndarray:
    """Derivatives of ``f`` along the right-invariant frame ``B_j s``, length ``m``.

    Uses ``E_j Phi = R^T (P_Z ad_j - ad_j P_Z) R`` and ``E_j f = -f tr(Phi^-1 E_j Phi)/2``.
    """
    s = np.asarray(s, dtype=float)
    n = I.n
    z, _ = _split(n)
    ad = structure_constants(n).ad
    R = ad_matrix(s)
    phi = I.matrix + R[z].T @ R[z]
    f = np.linalg.det(phi) ** -0.5
    # tr(Phi^-1 R^T (P_Z ad_j - ad_j P_Z) R) = tr(K (P_Z ad_j - ad_j P_Z)), K = R Phi^-1 R^T
    K = R @ np.linalg.solve(phi, R.T)
    PZ = np.zeros_like(K)
    PZ[z, z] = np.eye(n - 1)
    comm = np.einsum("ab,jbc->jac", PZ, ad) - np.einsum("jab,bc->jac", ad, PZ)
    tr = np.einsum("ca,jac->j", K, comm)
    return -0.5 * f * tr


def conformal_factor_trace_formula(s, I: InertiaTensor) -> np.ndarray:
    """``E_j f`` for the ``zeta_a`` directions via ``df = -f/2 sum N_a eta^a``.

    ``N_a = -2 sum_{alpha,b} c^alpha_{ab} <Phi^-1 Ad(s^-1) Y_alpha, Ad(s^-1) Z_b>``.
    Returns the ``n - 1`` values ``zeta_a f``; ``xi_alpha f`` vanishes by invariance.
    """
    s = np.asarray(s, dtype=float)
    n = I.n
    z, y = _split(n)
    C = structure_constants(n).C
    R = ad_matrix(s)
    phi = I.matrix + R[z].T @ R[z]
    f = np.linalg.det(phi) ** -0.5
    # <Phi^-1 xi_alpha, zeta_b> in body coefficients: rows of R are frame vectors
    G = R[y] @ np.linalg.solve(phi, R[z].T)  # [alpha, b]
    N = -2.0 * np.einsum("abk,kb->a", C[z, z][:, :, y], G)
    return -0.5 * f * N
