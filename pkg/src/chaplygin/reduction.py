"""Internal H-symmetry (stabilizer of e_n), momentum level sets and closedness verdicts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ball import InertiaTensor, PhasePoint, coframe_coeffs, momentum_JH
from .dynamics import dJH_matrix
from .forms import (
    FormTag,
    TangentVectorTS,
    compose_forms,
    exterior_derivative_tensor,
    from_frame_coords,
    kit,
    restricted_max,
)
from .son import adapted_basis, algebra_dim, hat, structure_constants

__all__ = [
    "ClosednessVerdict",
    "DegeneratePointError",
    "DimensionAudit",
    "ReducedSample",
    "WitnessReport",
    "closedness_verdict",
    "h_action",
    "level_set_frame",
    "level_set_point",
    "nonclosedness_witness",
    "orbit_invariants",
    "project_reduced",
    "reduced_dimension_audit",
]

CLOSEDNESS_FORMS = ("OMEGA_NH", "OMEGA_TILDE", "F_OMEGA_TILDE")


class DegeneratePointError(ValueError):
    """``dJ_H`` lost rank at the requested point."""


def h_action(h, p: PhasePoint) -> PhasePoint:
    """Left action ``(s, u) -> (h s, u)`` of the stabilizer of ``e_n``."""
    h = np.asarray(h, dtype=float)
    n = p.n
    e = np.zeros(n)
    e[-1] = 1.0
    if np.max(np.abs(h @ e - e)) > 1e-12 or np.max(np.abs(h.T @ h - np.eye(n))) > 1e-12:
        raise ValueError("h is not a rotation fixing e_n")
    return PhasePoint(h @ p.s, p.u)


def orbit_invariants(level: np.ndarray, n: int) -> np.ndarray:
    """Ad(H)-invariants ``tr(L^(2k))`` of ``L = sum lam_alpha Y_alpha`` for ``k = 1..floor((n-1)/2)``."""
    c = np.zeros(algebra_dim(n))
    c[adapted_basis(n).y_slice] = level
    L = hat(c, n)[: n - 1, : n - 1]
    L2 = L @ L
    out, P = [], np.eye(n - 1)
    for _ in range((n - 1) // 2):
        P = P @ L2
        out.append(np.trace(P))
    return np.array(out)


@dataclass(frozen=True)
class ReducedSample:
    gamma: np.ndarray
    u: np.ndarray
    level: np.ndarray
    orbit_invariants: np.ndarray


def project_reduced(p: PhasePoint, I: InertiaTensor) -> ReducedSample:
    """Poisson vector ``gamma = s^T e_n`` together with the momentum level data."""
    level = momentum_JH(p, I)
    return ReducedSample(p.s[-1].copy(), p.u.copy(), level, orbit_invariants(level, p.n))


def level_set_frame(p: PhasePoint, I: InertiaTensor, as_vectors: bool = False, rtol: float = 1e-10):
    """Orthonormal (in frame coordinates) basis of ``ker dJ_H`` at ``p``.

    Returns a ``(2m - dim h, 2m)`` array of frame coordinates, or a list of
    `TangentVectorTS` when ``as_vectors``.
    """
    D = dJH_matrix(p, I)
    dim_h = D.shape[0]
    _, sv, Vt = np.linalg.svd(D)
    rank = int(np.sum(sv > rtol * max(1.0, sv[0])))
    if rank != dim_h:
        raise DegeneratePointError(f"dJ_H has rank {rank}, expected {dim_h}")
    basis = Vt[rank:]
    if as_vectors:
        return [from_frame_coords(p, c) for c in basis]
    return basis


def level_set_point(n: int, I: InertiaTensor, level, rng: np.random.Generator,
                    s: np.ndarray | None = None) -> PhasePoint:
    """Random point with ``J_H = level``: the ``Y``-block of ``Ad(s) I u`` is prescribed.

    Draws ``s`` and ``u`` at random, then corrects ``u`` along ``I^-1 Ad(s^-1)`` of ``h``.
    """
    from .son import ad_matrix, random_rotation

    s = random_rotation(n, rng) if s is None else np.asarray(s, dtype=float)
    m = algebra_dim(n)
    y = adapted_basis(n).y_slice
    R = ad_matrix(s)
    wt = R @ (I.matrix @ rng.standard_normal(m))
    wt[y] = np.asarray(level, dtype=float)
    return PhasePoint(s, np.linalg.solve(I.matrix, R.T @ wt))


def _form(name: str, I: InertiaTensor):
    name = name.upper()
    if name == "F_OMEGA_TILDE":
        return compose_forms(FormTag.SCALED, I)
    if name in ("OMEGA_NH", "OMEGA_TILDE"):
        return compose_forms(FormTag(name), I)
    raise ValueError(f"closedness form must be one of {CLOSEDNESS_FORMS}, got {name!r}")


@dataclass(frozen=True)
class ClosednessVerdict:
    form: str
    restricted: bool
    max_residual: float
    triples: int


def closedness_verdict(p: PhasePoint, I: InertiaTensor, form: str = "OMEGA_TILDE",
                       restrict: bool = True, method: str = "auto") -> ClosednessVerdict:
    """Max ``|d omega(v1, v2, v3)|`` over triples of frame vectors (``restrict=False``)
    or of an orthonormal basis of the momentum level set (``restrict=True``)."""
    omega = _form(form, I)
    T = exterior_derivative_tensor(omega, p, method)
    if restrict:
        basis = level_set_frame(p, I)
    else:
        basis = np.eye(T.shape[0])
    r = basis.shape[0]
    return ClosednessVerdict(form.upper(), restrict, restricted_max(T, basis), r * (r - 1) * (r - 2) // 6)


@dataclass(frozen=True)
class WitnessReport:
    found: bool
    max_residual: float
    samples: int
    threshold: float
    point: PhasePoint | None
    triple: np.ndarray | None


def nonclosedness_witness(I: InertiaTensor, rng: np.random.Generator, form: str = "OMEGA_NH",
                          samples: int = 10_000, threshold: float = 1e-3,
                          triples_per_point: int = 100) -> WitnessReport:
    """Seeded random search for a triple with ``|d omega(v1, v2, v3)| > threshold``.

    Points are ``(s, u)`` with Haar ``s`` and Gaussian ``u``; triples are
    independent unit vectors in frame coordinates.  Stops at the first hit.
    """
    from .son import random_rotation

    omega = _form(form, I)
    n, m = I.n, algebra_dim(I.n)
    best, best_p, best_v = 0.0, None, None
    done = 0
    while done < samples:
        p = PhasePoint(random_rotation(n, rng), rng.standard_normal(m))
        T = exterior_derivative_tensor(omega, p)
        k = min(triples_per_point, samples - done)
        V = rng.standard_normal((k, 3, 2 * m))
        V /= np.linalg.norm(V, axis=-1, keepdims=True)
        vals = np.abs(np.einsum("abc,ta,tb,tc->t", T, V[:, 0], V[:, 1], V[:, 2]))
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_p, best_v = float(vals[i]), p, V[i]
        hits = np.nonzero(vals > threshold)[0]
        if len(hits):
            done += int(hits[0]) + 1
            j = int(hits[0])
            return WitnessReport(True, float(vals[j]), done, threshold, p, V[j])
        done += k
    return WitnessReport(False, best, done, threshold, best_p, best_v)


@dataclass(frozen=True)
class DimensionAudit:
    n: int
    dim_h: int
    dim_h_lambda: int
    dim_orbit: int
    reduced_dim: int
    measured_reduced_dim: int
    level_set_dim: int
    orbit_dim: int

    @property
    def consistent(self) -> bool:
        return self.reduced_dim == self.measured_reduced_dim


def _numerical_rank(A, rtol=1e-9):
    if A.size == 0:
        return 0
    sv = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(sv > rtol * max(1.0, sv[0])))


def reduced_dimension_audit(n: int, lam, I: InertiaTensor | None = None,
                            rng: np.random.Generator | None = None) -> DimensionAudit:
    """Dimension of ``J_H^-1(O)/H`` by formula and by measured ranks.

    Formula: ``2(n-1) + dim O`` with ``dim O = dim h - dim ker(ad_lam|h)``.
    Measurement at a random point of ``J_H^-1(lam)``: the level-set dimension
    ``2m - rank dJ_H`` minus the rank of the ``H_lam`` generators there; the
    quotient ``J_H^-1(lam)/H_lam`` is isomorphic to ``J_H^-1(O)/H``.
    """
    rng = rng or np.random.default_rng(0)
    I = I or InertiaTensor.identity(n)
    k = kit(n)
    m = k.m
    lam = np.asarray(lam, dtype=float)
    C = structure_constants(n).C
    y = np.arange(m)[k.y]
    # ad_lam restricted to h, in h coordinates: [Y_b, lam]_c
    lam_full = np.zeros(m)
    lam_full[k.y] = lam
    adl = np.einsum("bjc,j->cb", C[np.ix_(y, np.arange(m), y)], lam_full)
    ker = np.linalg.svd(adl)[2][_numerical_rank(adl):] if adl.size else np.zeros((0, len(y)))
    dim_h = len(y)
    dim_hl = ker.shape[0]
    dim_O = dim_h - dim_hl
    formula = 2 * (n - 1) + dim_O

    p = level_set_point(n, I, lam, rng)
    level_dim = 2 * m - _numerical_rank(dJH_matrix(p, I))
    # generator of xi in h at p: flow (exp(t xi) s, u) = frame direction E_xi
    gens = np.zeros((dim_hl, 2 * m))
    gens[:, y] = ker
    orbit_dim = _numerical_rank(gens)
    # generators must be tangent to the level set
    tangent = np.max(np.abs(dJH_matrix(p, I) @ gens.T), initial=0.0)
    if tangent > 1e-8:
        raise DegeneratePointError(f"H_lambda generators leave the level set ({tangent:.3e})")
    return DimensionAudit(n, dim_h, dim_hl, dim_O, formula, level_dim - orbit_dim, level_dim, orbit_dim)
