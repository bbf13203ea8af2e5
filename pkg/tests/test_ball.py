import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from chaplygin.ball import (
    InertiaTensor,
    PhasePoint,
    coframe_coeffs,
    compressed_hamiltonian,
    conformal_factor,
    conformal_factor_derivative,
    conformal_factor_trace_formula,
    connection_A,
    connection_A_contact,
    metric_phi,
    momentum_JH,
    momentum_JH_matrix,
)
from chaplygin.son import adapted_basis, algebra_dim, group_exp, hat, random_rotation, random_stabilizer

from conftest import anisotropic, random_point

seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([3, 4])


def test_inertia_validation():
    with pytest.raises(ValueError, match="positive definite"):
        InertiaTensor.diagonal(3, [1.0, -1.0, 2.0])
    with pytest.raises(ValueError, match="symmetric"):
        InertiaTensor(3, np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(ValueError):
        InertiaTensor(4, np.eye(3))
    assert InertiaTensor.identity(4).is_homogeneous
    assert not InertiaTensor.principal3(1.0, 2.0, 3.0).is_homogeneous


def test_phase_point_shapes():
    with pytest.raises(ValueError):
        PhasePoint(np.eye(3), np.zeros(6))


def test_principal3_order():
    I = InertiaTensor.principal3(1.0, 2.0, 3.0)
    assert_allclose(np.diag(I.matrix), [1.0, 2.0, 3.0])
    assert [adapted_basis(3).label(i) for i in range(3)] == ["Z1", "Z2", "Y12"]


def test_identity_start_coframes():
    # at s = e the coframe values are the coefficients themselves
    u = np.array([0.3, -0.2, 0.7])
    c = coframe_coeffs(PhasePoint(np.eye(3), u), InertiaTensor.principal3(1.0, 2.0, 3.0))
    assert_allclose(c.g, u[:2])
    assert_allclose(c.l, u[2:])
    assert_allclose(c.l_tilde, [2.1])
    assert_allclose(connection_A(PhasePoint(np.eye(3), u)), -u[:2])


def test_conformal_factor_homogeneous_values(rng):
    for n in (3, 4, 5):
        s = random_rotation(n, rng)
        # Phi = 1 + P_Z in space coordinates: eigenvalue 2 with multiplicity n - 1
        assert abs(conformal_factor(s, InertiaTensor.identity(n)) - 2.0 ** (-(n - 1) / 2)) <= 1e-14
    assert abs(conformal_factor(np.eye(3), InertiaTensor.identity(3)) - 0.5) <= 1e-15


@given(dims, seeds)
def test_connection_two_routes(n, seed):
    p = random_point(n, np.random.default_rng(seed))
    assert_allclose(connection_A(p), connection_A_contact(p), atol=1e-12)


@given(dims, seeds)
def test_hamiltonian_is_metric_quadratic_form(n, seed):
    rng = np.random.default_rng(seed)
    p, I = random_point(n, rng), anisotropic(n, rng)
    phi = metric_phi(p.s, I)
    assert abs(compressed_hamiltonian(p, I) - 0.5 * p.u @ phi @ p.u) <= 1e-12
    assert np.linalg.eigvalsh(phi)[0] >= np.linalg.eigvalsh(I.matrix)[0] - 1e-12


@given(dims, seeds)
def test_momentum_matrix_lies_in_h(n, seed):
    rng = np.random.default_rng(seed)
    p, I = random_point(n, rng), anisotropic(n, rng)
    L = momentum_JH_matrix(p, I)
    assert_allclose(L[:, -1], 0.0, atol=0)
    # J_H is the h-part of Ad(s) I u
    full = p.s @ hat(I.matrix @ p.u, n) @ p.s.T
    assert_allclose(L[: n - 1, : n - 1], full[: n - 1, : n - 1], atol=1e-12)
    assert momentum_JH(p, I).shape == ((n - 1) * (n - 2) // 2,)


@given(dims, seeds)
def test_conformal_factor_H_invariant(n, seed):
    rng = np.random.default_rng(seed)
    I = anisotropic(n, rng)
    s, h = random_rotation(n, rng), random_stabilizer(n, rng)
    assert abs(conformal_factor(h @ s, I) - conformal_factor(s, I)) <= 1e-12


@pytest.mark.parametrize("n", [3, 4])
def test_conformal_factor_derivative_fd(n, rng):
    I = anisotropic(n, rng)
    s = random_rotation(n, rng)
    m, eps = algebra_dim(n), 1e-5
    fd = []
    for j in range(m):
        e = np.zeros(m)
        e[j] = eps
        fp = conformal_factor(group_exp(hat(e, n)) @ s, I)
        fm = conformal_factor(group_exp(hat(-e, n)) @ s, I)
        fd.append((fp - fm) / (2 * eps))
    assert_allclose(conformal_factor_derivative(s, I), fd, atol=1e-8)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_conformal_factor_trace_formula(n, rng):
    I = anisotropic(n, rng)
    s = random_rotation(n, rng)
    d = conformal_factor_derivative(s, I)
    assert_allclose(conformal_factor_trace_formula(s, I), d[: n - 1], atol=1e-12)
    assert np.max(np.abs(d[n - 1:])) <= 1e-12


def test_conformal_factor_batched(rng):
    I = anisotropic(3, rng)
    s = np.stack([random_rotation(3, rng) for _ in range(4)])
    assert_allclose(conformal_factor(s, I), [conformal_factor(x, I) for x in s], rtol=1e-14)
