import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import expm

from chaplygin.son import (
    AlgebraElement,
    GroupElement,
    ad_action,
    ad_matrix,
    adapted_basis,
    algebra_dim,
    bracket,
    group_exp,
    hat,
    killing_ip,
    random_rotation,
    random_stabilizer,
    structure_constants,
    vee,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([3, 4, 5])


def E(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def test_basis_n3_elements():
    b = adapted_basis(3)
    Z1, Z2, Y3 = b.matrices
    assert_array_equal(Y3, E(3, 0, 1) - E(3, 1, 0))
    assert_array_equal(Z1, E(3, 0, 2) - E(3, 2, 0))
    assert_array_equal(Z2, E(3, 1, 2) - E(3, 2, 1))
    for B in b.matrices:
        assert -0.5 * np.trace(B @ B) == 1.0


def test_basis_n3_action_on_e3():
    Z1, _, Y3 = adapted_basis(3).matrices
    e3 = np.array([0.0, 0.0, 1.0])
    assert_array_equal(Y3 @ e3, 0.0)
    assert_array_equal(Z1 @ e3, [1.0, 0.0, 0.0])


@pytest.mark.parametrize("n", [3, 4, 5])
def test_basis_dimensions_and_orthonormality(n):
    b = adapted_basis(n)
    assert b.n_z == n - 1
    assert b.n_y == (n - 1) * (n - 2) // 2
    assert b.dim == algebra_dim(n)
    gram = -0.5 * np.einsum("iab,jba->ij", b.matrices, b.matrices)
    assert np.max(np.abs(gram - np.eye(b.dim))) <= 1e-13
    en = np.eye(n)[-1]
    assert np.all(b.Y @ en == 0.0)
    # Z_a lives in the last row and column only
    assert np.all(b.Z[:, : n - 1, : n - 1] == 0.0)


def test_basis_rejects_small_n():
    with pytest.raises(ValueError):
        adapted_basis(2)


def test_bracket_examples_n3():
    Z1, Z2, Y3 = (AlgebraElement(m) for m in adapted_basis(3).matrices)
    assert_allclose(bracket(Z1, Z2).matrix, -Y3.matrix, atol=0)
    assert_allclose(bracket(Y3, Z1).matrix, -Z2.matrix, atol=0)
    assert_allclose(bracket(Z1, Z1).matrix, 0.0, atol=0)


def test_bracket_dimension_mismatch():
    with pytest.raises(ValueError):
        bracket(np.zeros((3, 3)), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        killing_ip(np.zeros((3, 3)), np.zeros((4, 4)))


def test_killing_examples():
    Z1, _, Y3 = adapted_basis(3).matrices
    assert killing_ip(Z1, Z1) == 1.0
    assert killing_ip(Z1, Y3) == 0.0


def test_structure_constants_n3():
    st_ = structure_constants(3)
    assert st_.C[0, 1, 2] == -1.0
    blocks = st_.blocks()
    assert np.all(blocks["c_z_hh"] == 0.0)
    assert np.all(blocks["c_h_hz"] == 0.0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_structure_tensor_invariants(n):
    st_ = structure_constants(n)
    assert st_.jacobi_residual() <= 1e-12
    assert st_.antisymmetry_residual() == 0.0
    b = st_.basis
    # C^k_ij = <[B_i, B_j], B_k> by direct matrix arithmetic
    for i in range(b.dim):
        for j in range(b.dim):
            comm = b.matrices[i] @ b.matrices[j] - b.matrices[j] @ b.matrices[i]
            expected = [-0.5 * np.trace(comm @ Bk) for Bk in b.matrices]
            assert_allclose(st_.C[i, j], expected, atol=1e-15)


def test_jacobi_detects_corruption():
    st_ = structure_constants(4)
    C = np.array(st_.C)
    C[0, 1, 3] += 0.1
    C[1, 0, 3] -= 0.1
    bad = type(st_)(st_.basis, C)
    assert bad.antisymmetry_residual() == 0.0
    assert bad.jacobi_residual() > 1e-3


def test_ad_action_examples():
    _, _, Y3 = adapted_basis(3).matrices
    X = AlgebraElement(Y3 * 0.7)
    assert_allclose(ad_action(np.eye(3), X.matrix), X.matrix)
    h = group_exp(0.9 * Y3)
    assert_allclose(ad_action(h, Y3), Y3, atol=1e-15)


def test_group_exp_examples():
    Z1, _, Y3 = adapted_basis(3).matrices
    assert_array_equal(group_exp(np.zeros((3, 3))), np.eye(3))
    R = group_exp(0.5 * np.pi * Y3)
    # Y3 sends e2 to e1, so the quarter turn does too
    assert_allclose(R @ np.array([0.0, 1.0, 0.0]), [1.0, 0.0, 0.0], atol=1e-15)
    assert_allclose(R, group_exp(0.5 * np.pi * Y3, method="series"), atol=1e-12)
    X = 1.3 * Z1 - 0.4 * Y3
    assert_allclose(group_exp(X) @ group_exp(-X), np.eye(3), atol=1e-12)
    g = group_exp(AlgebraElement(X))
    assert isinstance(g, GroupElement)


def test_group_exp_rejects_unknown_method():
    with pytest.raises(ValueError):
        group_exp(np.zeros((3, 3)), method="pade")
    with pytest.raises(ValueError):
        group_exp(np.zeros((4, 4)), method="rodrigues")


def test_algebra_element_validation():
    with pytest.raises(ValueError):
        AlgebraElement(np.eye(3))
    with pytest.raises(ValueError):
        GroupElement(2 * np.eye(3))
    with pytest.raises(ValueError):
        GroupElement(np.diag([1.0, 1.0, -1.0]))


@given(dims, seeds)
def test_coeff_roundtrip(n, seed):
    x = np.random.default_rng(seed).standard_normal(algebra_dim(n))
    assert_array_equal(vee(hat(x, n)), x)
    assert_array_equal(AlgebraElement.from_coeffs(x, n).coeffs, x)


@given(dims, seeds, st.floats(0.0, 20.0))
def test_group_exp_matches_scipy(n, seed, scale):
    X = hat(np.random.default_rng(seed).standard_normal(algebra_dim(n)) * scale, n)
    R = group_exp(X)
    assert_allclose(R, expm(X), atol=1e-12 * max(1.0, scale))
    assert np.max(np.abs(R.T @ R - np.eye(n))) <= 1e-12
    assert np.linalg.det(R) > 0


@given(dims, seeds)
def test_ad_invariance_and_composition(n, seed):
    rng = np.random.default_rng(seed)
    s1, s2 = random_rotation(n, rng), random_rotation(n, rng)
    X, Y = (hat(rng.standard_normal(algebra_dim(n)), n) for _ in range(2))
    assert abs(killing_ip(ad_action(s1, X), ad_action(s1, Y)) - killing_ip(X, Y)) <= 1e-12
    assert_allclose(ad_action(s1 @ s2, X), ad_action(s1, ad_action(s2, X)), atol=1e-12)


@given(dims, seeds)
def test_ad_matrix_matches_conjugation(n, seed):
    rng = np.random.default_rng(seed)
    s = random_rotation(n, rng)
    x = rng.standard_normal(algebra_dim(n))
    R = ad_matrix(s)
    assert_allclose(R @ x, vee(s @ hat(x, n) @ s.T), atol=1e-13)
    assert_allclose(R.T @ R, np.eye(algebra_dim(n)), atol=1e-13)


@given(dims, seeds)
def test_stabilizer_fixes_e_n(n, seed):
    h = random_stabilizer(n, np.random.default_rng(seed))
    assert_allclose(h @ np.eye(n)[-1], np.eye(n)[-1], atol=0)
    assert abs(np.linalg.det(h) - 1.0) < 1e-12
