import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from chaplygin.ball import InertiaTensor, PhasePoint, compressed_hamiltonian, momentum_JH, momentum_JH_matrix
from chaplygin.dynamics import dJH_matrix, integrate
from chaplygin.reduction import (
    closedness_verdict,
    h_action,
    level_set_frame,
    level_set_point,
    nonclosedness_witness,
    orbit_invariants,
    project_reduced,
    reduced_dimension_audit,
)
from chaplygin.son import hat, random_rotation, random_stabilizer

from conftest import anisotropic, random_point

seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([3, 4, 5])


@given(dims, seeds)
def test_h_action_preserves_energy_and_moves_momentum_by_Ad(n, seed):
    rng = np.random.default_rng(seed)
    p, I, h = random_point(n, rng), anisotropic(n, rng), random_stabilizer(n, rng)
    q = h_action(h, p)
    assert abs(compressed_hamiltonian(q, I) - compressed_hamiltonian(p, I)) <= 1e-12
    assert_allclose(momentum_JH_matrix(q, I), h @ momentum_JH_matrix(p, I) @ h.T, atol=1e-12)
    assert_allclose(orbit_invariants(momentum_JH(q, I), n), orbit_invariants(momentum_JH(p, I), n),
                    atol=1e-10)
    assert_allclose(project_reduced(q, I).gamma, project_reduced(p, I).gamma, atol=1e-13)


def test_h_action_rejects_non_stabilizer(rng):
    p = random_point(3, rng)
    with pytest.raises(ValueError):
        h_action(random_rotation(3, rng), p)


def test_orbit_invariants_count():
    assert orbit_invariants(np.array([2.0]), 3).tolist() == [-8.0]
    assert orbit_invariants(np.ones(6), 5).shape == (2,)


def test_poisson_vector_kinematics(rng):
    # gamma' = -u gamma for gamma = s^T e_n
    I = anisotropic(4, rng)
    tr = integrate(random_point(4, rng), I, 0.2, 1e-3)
    gam = np.array([project_reduced(tr.point(i), I).gamma for i in range(len(tr))])
    rate = np.gradient(gam, tr.t, axis=0, edge_order=2)
    expected = -np.einsum("tij,tj->ti", hat(tr.u, 4), gam)
    assert_allclose(rate[1:-1], expected[1:-1], atol=1e-5)
    assert_allclose(np.linalg.norm(gam, axis=1), 1.0, atol=1e-13)


@pytest.mark.parametrize("n", [4, 5])
def test_orbit_invariants_conserved_along_flow(n, rng):
    I = anisotropic(n, rng)
    tr = integrate(random_point(n, rng), I, 1.0, 1e-3, stride=100)
    inv = np.array([orbit_invariants(j, n) for j in tr.momentum()])
    assert np.max(np.abs(inv - inv[0])) <= 1e-9


@pytest.mark.parametrize("n", [3, 4])
def test_level_set_point_and_frame(n, rng):
    I = anisotropic(n, rng)
    lam = rng.standard_normal((n - 1) * (n - 2) // 2)
    p = level_set_point(n, I, lam, rng)
    assert_allclose(momentum_JH(p, I), lam, atol=1e-12)
    B = level_set_frame(p, I)
    assert B.shape == (n * (n - 1) - len(lam), n * (n - 1))
    assert_allclose(B @ B.T, np.eye(B.shape[0]), atol=1e-12)
    assert np.max(np.abs(dJH_matrix(p, I) @ B.T)) <= 1e-12
    assert len(level_set_frame(p, I, as_vectors=True)) == B.shape[0]


def test_homogeneous_closedness_n3(rng):
    I = InertiaTensor.identity(3)
    p = level_set_point(3, I, [0.7], rng)
    assert closedness_verdict(p, I, "OMEGA_TILDE").max_residual <= 1e-8
    # five level-set directions give ten triples
    assert closedness_verdict(p, I, "OMEGA_TILDE").triples == 10


def test_anisotropic_n3_needs_the_conformal_factor(rng):
    I = InertiaTensor.principal3(1.0, 2.0, 3.0)
    p = level_set_point(3, I, [0.4], rng)
    assert closedness_verdict(p, I, "F_OMEGA_TILDE").max_residual <= 1e-6
    assert closedness_verdict(p, I, "OMEGA_TILDE").max_residual > 1e-4
    assert closedness_verdict(p, I, "OMEGA_NH", restrict=False).max_residual > 1e-4


def test_closedness_rejects_unknown_form(rng):
    p = random_point(3, rng)
    with pytest.raises(ValueError):
        closedness_verdict(p, InertiaTensor.identity(3), "OMEGA_S")


def test_nonclosedness_witness(rng):
    w = nonclosedness_witness(InertiaTensor.principal3(1.0, 2.0, 3.0), rng)
    assert w.found and w.max_residual > 1e-3 and w.samples <= 10_000
    none = nonclosedness_witness(InertiaTensor.identity(3), rng, form="F_OMEGA_TILDE",
                                 samples=200, threshold=1e3)
    assert not none.found and none.samples == 200


@pytest.mark.parametrize("n,lam,expected", [
    (3, [1.3], 4),
    (3, [0.0], 4),
    (4, [0.3, -1.1, 0.8], 8),
    (4, [0.0, 0.0, 0.0], 6),
])
def test_reduced_dimension_audit(n, lam, expected, rng):
    audit = reduced_dimension_audit(n, lam, anisotropic(n, rng), rng)
    assert audit.reduced_dim == expected
    assert audit.consistent
