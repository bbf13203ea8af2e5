"""The Lie algebra so(n), its adapted basis and the group SO(n).

Algebra elements are handled in two views: skew matrices and coefficient
vectors in the adapted basis.  The basis is ordered with the ``h⊥`` block
first (``Z_a = E_an - E_na``) followed by the ``h`` block
(``Y = E_ij - E_ji`` for ``i < j < n``, lexicographic).  ``h`` is the
stabilizer algebra of the last standard basis vector ``e_n``.

``E_ij`` denotes the matrix unit with ``E_ij e_j = e_i``.  The inner product
is ``<X, Y> = -tr(XY)/2``, for which the basis is orthonormal.

All functions broadcast over leading axes where that is natural.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "AdaptedBasis",
    "AlgebraElement",
    "GroupElement",
    "StructureTensor",
    "ad_action",
    "ad_matrix",
    "adapted_basis",
    "algebra_dim",
    "bracket",
    "group_exp",
    "hat",
    "killing_ip",
    "structure_constants",
    "vee",
]


def algebra_dim(n: int) -> int:
    return n * (n - 1) // 2


@dataclass(frozen=True, eq=False)
class AdaptedBasis:
    """Orthonormal basis of so(n) adapted to ``h ⊕ h⊥``.

    ``pairs[k] = (i, j)`` with ``i < j`` means ``B_k = E_ij - E_ji`` (0-based).
    """

    n: int
    pairs: tuple
    matrices: np.ndarray = field(repr=False)
    n_z: int
    n_y: int

    @property
    def dim(self) -> int:
        return self.n_z + self.n_y

    @property
    def z_slice(self) -> slice:
        return slice(0, self.n_z)

    @property
    def y_slice(self) -> slice:
        return slice(self.n_z, self.n_z + self.n_y)

    @property
    def Z(self) -> np.ndarray:
        return self.matrices[self.z_slice]

    @property
    def Y(self) -> np.ndarray:
        return self.matrices[self.y_slice]

    def label(self, k: int) -> str:
        i, j = self.pairs[k]
        if k < self.n_z:
            return f"Z{i + 1}"
        return f"Y{i + 1}{j + 1}"


@lru_cache(maxsize=None)
def adapted_basis(n: int) -> AdaptedBasis:
    """Return the adapted orthonormal basis of so(n), ``n >= 3``."""
    if int(n) != n or n < 3:
        raise ValueError(f"adapted basis needs integer n >= 3, got {n!r}")
    n = int(n)
    pairs = [(a, n - 1) for a in range(n - 1)]
    pairs += [(i, j) for i in range(n - 1) for j in range(i + 1, n - 1)]
    mats = np.zeros((len(pairs), n, n))
    for k, (i, j) in enumerate(pairs):
        mats[k, i, j] = 1.0
        mats[k, j, i] = -1.0
    mats.setflags(write=False)
    return AdaptedBasis(n=n, pairs=tuple(pairs), matrices=mats, n_z=n - 1,
                        n_y=(n - 1) * (n - 2) // 2)


@lru_cache(maxsize=None)
def _index_arrays(n):
    basis = adapted_basis(n)
    p = np.array([ij[0] for ij in basis.pairs])
    q = np.array([ij[1] for ij in basis.pairs])
    return p, q


def hat(coeffs, n: int | None = None) -> np.ndarray:
    """Coefficient vector(s) -> skew matrix (matrices)."""
    coeffs = np.asarray(coeffs, dtype=float)
    m = coeffs.shape[-1]
    if n is None:
        n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if algebra_dim(n) != m:
        raise ValueError(f"{m} coefficients do not match so({n})")
    p, q = _index_arrays(n)
    out = np.zeros(coeffs.shape[:-1] + (n, n))
    out[..., p, q] = coeffs
    out[..., q, p] = -coeffs
    return out


def vee(matrix) -> np.ndarray:
    """Skew matrix (matrices) -> coefficient vector(s) in the adapted basis.

    Reads the upper-triangular entries, so it is the exact inverse of `hat`.
    """
    matrix = np.asarray(matrix, dtype=float)
    p, q = _index_arrays(matrix.shape[-1])
    return matrix[..., p, q].copy()


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Element of so(n), stored as a skew matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("algebra element must be a square matrix")
        if np.max(np.abs(mat + mat.T), initial=0.0) > 1e-13 * max(1.0, np.max(np.abs(mat))):
            raise ValueError("algebra element must be skew-symmetric")
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_coeffs(cls, coeffs, n: int | None = None) -> AlgebraElement:
        return cls(hat(coeffs, n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def coeffs(self) -> np.ndarray:
        return vee(self.matrix)

    def __add__(self, other):
        return AlgebraElement(self.matrix + _as_matrix(other))

    def __sub__(self, other):
        return AlgebraElement(self.matrix - _as_matrix(other))

    def __neg__(self):
        return AlgebraElement(-self.matrix)

    def __mul__(self, scalar):
        return AlgebraElement(float(scalar) * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Element of SO(n)."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        n = mat.shape[0]
        if mat.shape != (n, n):
            raise ValueError("group element must be a square matrix")
        if np.max(np.abs(mat.T @ mat - np.eye(n))) > 1e-10 or np.linalg.det(mat) <= 0:
            raise ValueError("group element must be a rotation matrix")
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def identity(cls, n: int) -> GroupElement:
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> GroupElement:
        return GroupElement(self.matrix.T)

    def __matmul__(self, other):
        return GroupElement(self.matrix @ _as_matrix(other))


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, (AlgebraElement, GroupElement)):
        return x.matrix
    return np.asarray(x, dtype=float)


def _same_n(*mats):
    shapes = {m.shape[-1] for m in mats} | {m.shape[-2] for m in mats}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {[m.shape for m in mats]}")


def bracket(X, Y):
    """Matrix commutator ``XY - YX``.  Returns the same type as ``X``."""
    x, y = _as_matrix(X), _as_matrix(Y)
    _same_n(x, y)
    out = x @ y - y @ x
    return AlgebraElement(out) if isinstance(X, AlgebraElement) else out


def killing_ip(X, Y):
    """Normalized Killing form ``-tr(XY)/2``."""
    x, y = _as_matrix(X), _as_matrix(Y)
    _same_n(x, y)
    val = -0.5 * np.einsum("...ij,...ji->...", x, y)
    return float(val) if np.ndim(val) == 0 else val


def ad_action(s, X):
    """``Ad(s) X = s X s^T``."""
    sm, x = _as_matrix(s), _as_matrix(X)
    _same_n(sm, x)
    out = sm @ x @ np.swapaxes(sm, -1, -2)
    return AlgebraElement(out) if isinstance(X, AlgebraElement) else out


def ad_matrix(s) -> np.ndarray:
    """Matrix of ``Ad(s)`` acting on adapted-basis coefficients.

    ``R[k, i] = <B_k, s B_i s^T>``; entries are 2x2 minors of ``s``.
    Orthogonal for every rotation ``s``.
    """
    sm = _as_matrix(s)
    p, q = _index_arrays(sm.shape[-1])
    P, Q = p[:, None], q[:, None]
    A, B = p[None, :], q[None, :]
    return sm[..., P, A] * sm[..., Q, B] - sm[..., P, B] * sm[..., Q, A]


@dataclass(frozen=True, eq=False)
class StructureTensor:
    """``C[i, j, k] = <[B_i, B_j], B_k>`` in the adapted basis."""

    basis: AdaptedBasis
    C: np.ndarray = field(repr=False)

    @property
    def ad(self) -> np.ndarray:
        """``ad[j]`` is the matrix of ``ad_{B_j}``: ``ad[j][k, l] = C[j, l, k]``."""
        return np.transpose(self.C, (0, 2, 1))

    def jacobi_residual(self) -> float:
        C = self.C
        # sum_m C^m_ij C^l_mk + cyclic, with C^m_ij = C[i, j, m]
        t = np.einsum("ijm,mkl->ijkl", C, C)
        cyc = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
        return float(np.max(np.abs(cyc)))

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.C + np.transpose(self.C, (1, 0, 2)))))

    def blocks(self) -> dict:
        z, y = self.basis.z_slice, self.basis.y_slice
        C = self.C
        return {
            "c_h_hh": C[y, y, y],  # c^alpha_{beta gamma}
            "c_h_zz": C[z, z, y],  # c^alpha_{ab}
            "c_z_hz": C[y, z, z],  # c^a_{beta b}
            "c_z_hh": C[y, y, z],  # must vanish: [h, h] in h
            "c_h_hz": C[y, z, y],  # must vanish: [h, h⊥] in h⊥
        }


@lru_cache(maxsize=None)
def _structure_constants(n: int) -> StructureTensor:
    basis = adapted_basis(n)
    B = basis.matrices
    comm = np.einsum("iab,jbc->ijac", B, B)
    comm = comm - np.swapaxes(comm, 0, 1)
    C = vee(comm)
    C.setflags(write=False)
    return StructureTensor(basis=basis, C=C)


def structure_constants(basis: AdaptedBasis | int) -> StructureTensor:
    n = basis if isinstance(basis, int) else basis.n
    return _structure_constants(n)


def _rodrigues(x: np.ndarray) -> np.ndarray:
    # so(3) closed form, x[..., 3, 3]
    theta2 = 0.5 * np.einsum("...ij,...ij->...", x, x)
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1 - theta2 / 6 + theta2**2 / 120, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24 + theta2**2 / 720, (1 - np.cos(safe)) / safe**2)
    x2 = x @ x
    return np.eye(3) + a[..., None, None] * x + b[..., None, None] * x2


def _expm_series(x: np.ndarray, order: int = 18) -> np.ndarray:
    n = x.shape[-1]
    norm = np.max(np.sum(np.abs(x), axis=-1), initial=0.0)
    squarings = max(0, int(np.ceil(np.log2(norm / 0.25)))) if norm > 0.25 else 0
    y = x / 2.0**squarings
    out = np.broadcast_to(np.eye(n), x.shape).copy()
    term = out.copy()
    # stop once norm^k / k! is below 1e-18 (bounds the remaining tail too)
    bound, terms = 1.0, order
    ynorm = norm / 2.0**squarings
    for k in range(1, order + 1):
        bound *= ynorm / k
        if bound < 1e-18:
            terms = k
            break
    for k in range(1, terms + 1):
        term = term @ y / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def group_exp(X, method: str = "auto"):
    """Matrix exponential of skew matrices.

    ``method`` is ``"auto"`` (Rodrigues for n = 3, else series), ``"rodrigues"``
    or ``"series"`` (scaling and squaring with a Taylor polynomial of degree at most 18).
    Returns the same type as ``X``.
    """
    x = _as_matrix(X)
    n = x.shape[-1]
    if method == "rodrigues" or (method == "auto" and n == 3):
        if n != 3:
            raise ValueError("Rodrigues formula only applies to n = 3")
        out = _rodrigues(x)
    elif method in ("series", "auto"):
        out = _expm_series(x)
    else:
        raise ValueError(f"unknown method {method!r}")
    return GroupElement(out) if isinstance(X, AlgebraElement) else out


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(n)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_stabilizer(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random element of the stabilizer of ``e_n`` (a copy of SO(n-1))."""
    h = np.eye(n)
    h[: n - 1, : n - 1] = random_rotation(n - 1, rng)
    return h
