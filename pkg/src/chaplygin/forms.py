"""Exterior calculus on TS = SO(n) x so(n) in a global bracket-closed frame.

The frame on T(TS) is ``F = (E_1..E_m, V_1..V_m)``:

* ``E_i`` is the lift of the right-invariant field ``B_i s`` with flow
  ``(s, u) -> (exp(t B_i) s, u)``; ``E_i`` for ``Z``/``Y`` indices are the lifts
  of ``zeta_a``/``xi_alpha``.
* ``V_i`` is the fiber field with flow ``(s, u) -> (s, u + t B_i)``.

Brackets: ``[E_i, E_j] = -C^k_ij E_k``, all others vanish.  A tangent vector
``(a, b)`` (left-trivialized base part, fiber part) has frame coordinates
``(Ad(s) a, b)``.  Forms are stored through their frame coefficient arrays and,
where available, closed-form frame derivatives of those arrays.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ball import InertiaTensor, PhasePoint, conformal_factor, conformal_factor_derivative
from .son import ad_matrix, adapted_basis, algebra_dim, group_exp, hat, structure_constants

__all__ = [
    "DEFAULT_EPS_U",
    "FormTag",
    "NearEquilibriumError",
    "OneForm",
    "TangentVectorTS",
    "TwoForm",
    "chi_matrix",
    "chi_projection",
    "compose_forms",
    "coframe_form",
    "exterior_derivative",
    "exterior_derivative_tensor",
    "frame_coords",
    "frame_vector",
    "from_frame_coords",
    "jk_term",
    "lcurv_term",
    "omega_S",
    "sigma_connection",
    "theta_S",
    "theta_S_form",
]

DEFAULT_EPS_U = 1e-8
FD_STEP = 1e-4


class NearEquilibriumError(ValueError):
    """Point lies outside U' = {all g_a != 0}."""


@dataclass(frozen=True)
class TangentVectorTS:
    """Tangent vector at a point of TS: base part ``a`` and fiber part ``b`` (coefficients)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    def __add__(self, other):
        return TangentVectorTS(self.a + other.a, self.b + other.b)

    def __mul__(self, c):
        return TangentVectorTS(c * self.a, c * self.b)

    __rmul__ = __mul__


def frame_coords(p: PhasePoint, v: TangentVectorTS) -> np.ndarray:
    return np.concatenate([ad_matrix(p.s) @ v.a, v.b])


def from_frame_coords(p: PhasePoint, c) -> TangentVectorTS:
    c = np.asarray(c, dtype=float)
    m = c.shape[0] // 2
    return TangentVectorTS(ad_matrix(p.s).T @ c[:m], c[m:])


def frame_vector(p: PhasePoint, i: int) -> TangentVectorTS:
    m = algebra_dim(p.n)
    c = np.zeros(2 * m)
    c[i] = 1.0
    return from_frame_coords(p, c)


def _as_coords(p, v):
    if isinstance(v, TangentVectorTS):
        return frame_coords(p, v)
    return np.asarray(v, dtype=float)


# ---------------------------------------------------------------------------
# coefficient kernels; s[..., n, n], u[..., m], Imat[m, m]; broadcast on leading axes


class _Kit:
    """Per-dimension constants used by the coefficient kernels."""

    def __init__(self, n: int):
        basis = adapted_basis(n)
        st = structure_constants(n)
        self.n, self.m = n, basis.dim
        self.z, self.y = basis.z_slice, basis.y_slice
        self.C = np.asarray(st.C)
        self.ad = np.ascontiguousarray(st.ad)
        self.zmask = np.zeros(self.m)
        self.zmask[self.z] = 1.0
        self.PZ = np.diag(self.zmask)
        m = self.m
        self.Cfull = np.zeros((2 * m, 2 * m, 2 * m))
        self.Cfull[:m, :m, :m] = self.C
        self.zz = np.zeros((m, m))
        self.zz[self.z, self.z] = 1.0
        # contractions over the last index as plain matmuls: x @ flat -> [..., m*m]
        self.ad_flat = np.ascontiguousarray(np.moveaxis(self.ad, 2, 0).reshape(m, m * m))
        self.C_flat = np.ascontiguousarray(np.moveaxis(self.C, 2, 0).reshape(m, m * m))
        self.Cz_flat = self.C_flat[self.z]
        self.Cy_flat = self.C_flat[self.y]

    def contract(self, x, flat):
        return (x @ flat).reshape(x.shape[:-1] + (self.m, self.m))


_KITS: dict = {}


def kit(n: int) -> _Kit:
    if n not in _KITS:
        _KITS[n] = _Kit(n)
    return _KITS[n]


def _block(WEE, M):
    m = WEE.shape[-1]
    out = np.zeros(WEE.shape[:-2] + (2 * m, 2 * m))
    out[..., :m, :m] = WEE
    out[..., :m, m:] = M
    out[..., m:, :m] = -np.swapaxes(M, -1, -2)
    return out


def local_data(s, u, Imat):
    """Space-frame quantities ``R = Ad(s)``, ``w = R u``, ``wt = R I u``."""
    R = ad_matrix(s)
    u = np.asarray(u, dtype=float)
    w = (R @ u[..., None])[..., 0]
    RI = R @ Imat
    wt = (RI @ u[..., None])[..., 0]
    return R, RI, w, wt


def theta_coeffs(k: _Kit, R, RI, w, wt):
    P = wt + k.zmask * w
    return np.concatenate([P, np.zeros_like(P)], axis=-1)


def omega_S_coeffs(k: _Kit, R, RI, w, wt):
    """Closed-form frame matrix of ``Omega^S = -d theta^S``."""
    P = wt + k.zmask * w
    DPE = k.contract(wt, k.ad_flat) + k.zmask * k.contract(w, k.ad_flat)
    Cterm = k.contract(P, k.C_flat)
    WEE = -(DPE - np.swapaxes(DPE, -1, -2) + Cterm)
    M = RI + k.zmask[:, None] * R
    return _block(WEE, M)


def jk_coeffs(k: _Kit, R, RI, w, wt):
    """``<J,K> = -sum g_a c^a_{beta b} rho^beta ^ eta^b``.

    Contracting ``C[:, :, a]`` over ``Z`` indices only populates the mixed
    (Y, Z) blocks since ``[h, h] ⊂ h`` and ``[h⊥, h⊥] ⊂ h``.
    """
    g = w[..., k.z]
    KEE = -k.contract(g, k.Cz_flat)
    return _block(KEE, np.zeros_like(KEE))


def lcurv_coeffs(k: _Kit, R, RI, w, wt):
    """``<L, Curv> = sum_alpha l_alpha sum_{b<c} c^alpha_bc eta^b ^ eta^c``."""
    l = w[..., k.y]
    KEE = k.zz * k.contract(l, k.Cy_flat)
    return _block(KEE, np.zeros_like(KEE))


# frame derivatives: leading axis l over the 2m frame fields


def _dw(k: _Kit, R, RI, w, wt):
    adw = np.einsum("lkq,q->lk", k.ad, w)
    adwt = np.einsum("lkq,q->lk", k.ad, wt)
    dw = np.concatenate([adw, R.T], axis=0)
    dwt = np.concatenate([adwt, RI.T], axis=0)
    return dw, dwt


def omega_S_derivative(k: _Kit, R, RI, w, wt):
    dw, dwt = _dw(k, R, RI, w, wt)
    dP = dwt + k.zmask * dw
    dDPE = np.einsum("jkq,lq->ljk", k.ad, dwt) + k.zmask * np.einsum("jkq,lq->ljk", k.ad, dw)
    dC = np.einsum("jki,li->ljk", k.C, dP)
    dWEE = -(dDPE - np.swapaxes(dDPE, -1, -2) + dC)
    m = k.m
    dM = np.zeros((2 * m, m, m))
    dM[:m] = k.ad @ RI + k.zmask[:, None] * (k.ad @ R)
    return _block(dWEE, dM)


def theta_derivative(k: _Kit, R, RI, w, wt):
    dw, dwt = _dw(k, R, RI, w, wt)
    dP = dwt + k.zmask * dw
    return np.concatenate([dP, np.zeros_like(dP)], axis=-1)


def jk_derivative(k: _Kit, R, RI, w, wt):
    dw, _ = _dw(k, R, RI, w, wt)
    return jk_coeffs(k, None, None, dw, None)


def lcurv_derivative(k: _Kit, R, RI, w, wt):
    dw, _ = _dw(k, R, RI, w, wt)
    return lcurv_coeffs(k, None, None, dw, None)


# ---------------------------------------------------------------------------
# form objects


class FormTag(str, enum.Enum):
    THETA_S = "THETA_S"
    COFRAME = "COFRAME"
    OMEGA_S = "OMEGA_S"
    JK = "JK"
    LCURV = "LCURV"
    OMEGA_NH = "OMEGA_NH"
    OMEGA_TILDE = "OMEGA_TILDE"
    SCALED = "SCALED"
    SUM = "SUM"
    TRUNCATED_JK = "TRUNCATED_JK"


@dataclass(frozen=True, eq=False)
class _FrameForm:
    """A form given by frame coefficients ``coeffs(p)`` and optional ``derivative(p)``.

    ``derivative(p)[l]`` is the frame derivative ``F_l`` of the coefficient array.
    Forms without a closed-form derivative use finite differences in `exterior_derivative`.
    """

    degree: int
    tag: FormTag
    n: int
    coeffs: Callable[[PhasePoint], np.ndarray]
    derivative: Callable[[PhasePoint], np.ndarray] | None = None
    label: str = ""

    def __call__(self, p: PhasePoint, *vectors):
        if len(vectors) != self.degree:
            raise TypeError(f"{self.degree}-form needs {self.degree} vectors")
        c = [_as_coords(p, v) for v in vectors]
        W = self.coeffs(p)
        if self.degree == 1:
            return float(W @ c[0])
        return float(c[0] @ W @ c[1])


class OneForm(_FrameForm):
    pass


class TwoForm(_FrameForm):
    def interior(self, p: PhasePoint, v) -> np.ndarray:
        """Frame coefficients of ``i(v) omega``."""
        return _as_coords(p, v) @ self.coeffs(p)

    def __add__(self, other: TwoForm) -> TwoForm:
        return _sum_forms(self, other, 1.0)

    def __sub__(self, other: TwoForm) -> TwoForm:
        return _sum_forms(self, other, -1.0)


def _sum_forms(a: TwoForm, b: TwoForm, sign: float) -> TwoForm:
    deriv = None
    if a.derivative is not None and b.derivative is not None:
        def deriv(p):
            return a.derivative(p) + sign * b.derivative(p)
    return TwoForm(2, FormTag.SUM, a.n, lambda p: a.coeffs(p) + sign * b.coeffs(p), deriv,
                   label=f"({a.label or a.tag.value} {'+' if sign > 0 else '-'} {b.label or b.tag.value})")


def _pointwise(kernel, I: InertiaTensor):
    k = kit(I.n)

    def fn(p: PhasePoint):
        return kernel(k, *local_data(p.s, p.u, I.matrix))

    return fn


def theta_S_form(I: InertiaTensor) -> OneForm:
    """``theta^S = sum l~_alpha rho^alpha + sum (g~_a + g_a) eta^a``."""
    return OneForm(1, FormTag.THETA_S, I.n, _pointwise(theta_coeffs, I),
                   _pointwise(theta_derivative, I), label="theta_S")


def coframe_form(n: int, i: int) -> OneForm:
    """The coframe element dual to ``E_i`` (``eta^a`` for Z indices, ``rho^alpha`` for Y)."""
    m = algebra_dim(n)
    c = np.zeros(2 * m)
    c[i] = 1.0
    return OneForm(1, FormTag.COFRAME, n, lambda p: c.copy(),
                   lambda p: np.zeros((2 * m, 2 * m)), label=_coframe_label(n, i))


def _coframe_label(n: int, i: int) -> str:
    b = adapted_basis(n)
    return b.label(i) if i < b.dim else f"du_{b.label(i - b.dim)}"


def conformal_scalar(I: InertiaTensor):
    """``f`` and its frame derivatives as a pair of callables on phase points."""
    m = algebra_dim(I.n)

    def value(p):
        return conformal_factor(p.s, I)

    def deriv(p):
        d = np.zeros(2 * m)
        d[:m] = conformal_factor_derivative(p.s, I)
        return d

    return value, deriv


def compose_forms(tag, I: InertiaTensor, f=None, base: TwoForm | None = None,
                  eps_U: float = DEFAULT_EPS_U) -> TwoForm:
    """Build one of the named 2-forms for inertia ``I``.

    ``SCALED`` multiplies ``base`` (default ``OMEGA_TILDE``) by the scalar field
    ``f = (value, derivative)``; with ``f=None`` the conformal factor is used.
    ``TRUNCATED_JK`` is ``<J,K> o Λ²χ`` and is only defined on U'.
    """
    tag = FormTag(tag)
    n = I.n
    if tag is FormTag.OMEGA_S:
        return TwoForm(2, tag, n, _pointwise(omega_S_coeffs, I),
                       _pointwise(omega_S_derivative, I), label="Omega_S")
    if tag is FormTag.JK:
        return TwoForm(2, tag, n, _pointwise(jk_coeffs, I), _pointwise(jk_derivative, I),
                       label="JK")
    if tag is FormTag.LCURV:
        return TwoForm(2, tag, n, _pointwise(lcurv_coeffs, I), _pointwise(lcurv_derivative, I),
                       label="LCurv")
    if tag is FormTag.OMEGA_NH:
        out = compose_forms(FormTag.OMEGA_S, I) - compose_forms(FormTag.JK, I)
        return TwoForm(2, tag, n, out.coeffs, out.derivative, label="Omega_nh")
    if tag is FormTag.OMEGA_TILDE:
        out = compose_forms(FormTag.OMEGA_S, I) - compose_forms(FormTag.LCURV, I)
        return TwoForm(2, tag, n, out.coeffs, out.derivative, label="Omega_tilde")
    if tag is FormTag.SCALED:
        base = base if base is not None else compose_forms(FormTag.OMEGA_TILDE, I)
        fval, fder = f if f is not None else conformal_scalar(I)

        def coeffs(p):
            return fval(p) * base.coeffs(p)

        deriv = None
        if base.derivative is not None and fder is not None:
            def deriv(p):
                return (np.einsum("l,ij->lij", fder(p), base.coeffs(p))
                        + fval(p) * base.derivative(p))

        return TwoForm(2, tag, n, coeffs, deriv, label=f"f*{base.label}")
    if tag is FormTag.TRUNCATED_JK:
        jk = compose_forms(FormTag.JK, I)

        def coeffs(p):
            X = chi_matrix(p, I, eps_U)
            return X.T @ jk.coeffs(p) @ X

        return TwoForm(2, tag, n, coeffs, None, label="JK o chi")
    raise ValueError(f"compose_forms cannot build {tag.value} directly")


def theta_S(p: PhasePoint, v: TangentVectorTS, I: InertiaTensor) -> float:
    return theta_S_form(I)(p, v)


def omega_S(p: PhasePoint, v1, v2, I: InertiaTensor) -> float:
    return compose_forms(FormTag.OMEGA_S, I)(p, v1, v2)


def jk_term(p: PhasePoint, v1, v2, I: InertiaTensor | None = None) -> float:
    I = I or InertiaTensor.identity(p.n)  # <J,K> does not depend on the inertia
    return compose_forms(FormTag.JK, I)(p, v1, v2)


def lcurv_term(p: PhasePoint, v1, v2, I: InertiaTensor | None = None) -> float:
    I = I or InertiaTensor.identity(p.n)
    return compose_forms(FormTag.LCURV, I)(p, v1, v2)


# ---------------------------------------------------------------------------
# truncation connection


def _g_and_l(p: PhasePoint, eps_U: float):
    k = kit(p.n)
    w = ad_matrix(p.s) @ p.u
    g, l = w[k.z], w[k.y]
    if np.min(np.abs(g)) <= eps_U:
        raise NearEquilibriumError(
            f"min |g_a| = {np.min(np.abs(g)):.3e} <= eps_U = {eps_U:g}: point outside U'")
    return k, g, l


def chi_matrix(p: PhasePoint, I: InertiaTensor | None = None, eps_U: float = DEFAULT_EPS_U):
    """Frame matrix of the horizontal projection ``chi`` (acts on frame coordinates)."""
    k, g, l = _g_and_l(p, eps_U)
    m, n = k.m, k.n
    X = np.eye(2 * m)
    X[k.y, :] = 0.0
    # rho-component of chi(v) = 1/(n-1) sum_a (l_alpha / g_a) eta^a(v)
    X[k.y, k.z] = np.outer(l, 1.0 / g) / (n - 1)
    return X


def chi_projection(p: PhasePoint, v: TangentVectorTS, I: InertiaTensor | None = None,
                   eps_U: float = DEFAULT_EPS_U) -> TangentVectorTS:
    return from_frame_coords(p, chi_matrix(p, I, eps_U) @ frame_coords(p, v))


def sigma_connection(p: PhasePoint, v, eps_U: float = DEFAULT_EPS_U) -> np.ndarray:
    """``sigma(v) = sum_alpha (rho^alpha + f_a^alpha eta^a)(v) xi_alpha`` with
    ``f_a^alpha = -l_alpha / ((n-1) g_a)``; returns the ``h`` coefficients."""
    k, g, l = _g_and_l(p, eps_U)
    c = _as_coords(p, v)
    f = -np.outer(l, 1.0 / g) / (k.n - 1)
    return c[k.y] + f @ c[k.z]


# ---------------------------------------------------------------------------
# exterior derivative


def _flow(p: PhasePoint, l: int, t: float) -> PhasePoint:
    m = algebra_dim(p.n)
    if l < m:
        e = np.zeros(m)
        e[l] = t
        return PhasePoint(group_exp(hat(e, p.n)) @ p.s, p.u)
    u = p.u.copy()
    u[l - m] += t
    return PhasePoint(p.s, u)


def fd_frame_derivative(fn, p: PhasePoint, h: float = FD_STEP) -> np.ndarray:
    """Fourth-order central differences of ``fn`` along every frame flow."""
    m = algebra_dim(p.n)
    out = []
    for l in range(2 * m):
        fp1, fm1 = fn(_flow(p, l, h)), fn(_flow(p, l, -h))
        fp2, fm2 = fn(_flow(p, l, 2 * h)), fn(_flow(p, l, -2 * h))
        out.append((8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h))
    return np.array(out)


def exterior_derivative_tensor(form: _FrameForm, p: PhasePoint, method: str = "auto") -> np.ndarray:
    """Frame coefficients of ``d form`` at ``p`` (shape ``(2m,)*(degree+1)``).

    ``method``: ``"auto"`` uses the closed-form frame derivative when the form
    has one, ``"analytic"`` requires it, ``"fd"`` forces finite differences.
    """
    if form.degree not in (1, 2):
        raise ValueError(f"unsupported form degree {form.degree}")
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown method {method!r}")
    if method == "analytic" and form.derivative is None:
        raise ValueError(f"form {form.label or form.tag.value} has no closed-form derivative")
    Cf = kit(p.n).Cfull
    W = form.coeffs(p)
    if form.derivative is not None and method != "fd":
        D = form.derivative(p)
    else:
        D = fd_frame_derivative(form.coeffs, p)
    if form.degree == 1:
        return D - D.T + np.einsum("ijq,q->ij", Cf, W)
    CW = np.einsum("ijq,qk->ijk", Cf, W)
    return (D - np.transpose(D, (1, 0, 2)) + np.transpose(D, (1, 2, 0))
            + CW - np.transpose(CW, (0, 2, 1)) + np.transpose(CW, (2, 0, 1)))


def exterior_derivative(form: _FrameForm, p: PhasePoint, *vectors, method: str = "auto") -> float:
    """``d form (v_0, ..., v_k)`` at ``p``."""
    if len(vectors) != form.degree + 1:
        raise TypeError(f"d of a {form.degree}-form takes {form.degree + 1} vectors")
    T = exterior_derivative_tensor(form, p, method)
    for v in vectors:
        T = np.tensordot(_as_coords(p, v), T, axes=(0, 0))
    return float(T)


def restricted_max(T: np.ndarray, basis: np.ndarray) -> float:
    """Max |T(v_i, v_j, v_k)| over triples of rows of ``basis`` (frame coordinates)."""
    Tr = np.einsum("ia,jb,kc,abc->ijk", basis, basis, basis, T)
    r = basis.shape[0]
    best = 0.0
    for i, j, k in itertools.combinations(range(r), 3):
        best = max(best, abs(Tr[i, j, k]))
    return best
