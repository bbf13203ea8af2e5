import numpy as np
import pytest
from numpy.testing import assert_allclose

from chaplygin.ball import InertiaTensor, PhasePoint, connection_A
from chaplygin.dynamics import contact_path, integrate
from chaplygin.oracle import (
    ConstraintDriftError,
    FullState,
    compare_projection,
    constraint_residual,
    full_energy,
    initial_full_state,
    integrate_constrained,
    multiplier_residual,
    multiplier_solve,
)

from conftest import anisotropic, random_point


@pytest.mark.parametrize("n", [3, 4])
def test_initial_state_satisfies_rolling(n, rng):
    p = random_point(n, rng)
    st = initial_full_state(p.s, p.u)
    assert constraint_residual(st) == 0.0
    # rolling velocity of the centre is minus the connection
    assert_allclose(st.xdot, -connection_A(p), atol=1e-12)


@pytest.mark.parametrize("n", [3, 4])
def test_multipliers_solve_the_constrained_equations(n, rng):
    p, I = random_point(n, rng), anisotropic(n, rng)
    st = initial_full_state(p.s, p.u)
    udot, xddot, lam = multiplier_solve(st, I)
    res = multiplier_residual(st, I, udot, xddot, lam)
    assert res["euler_lagrange"] <= 1e-12
    assert res["translation"] <= 1e-12
    assert res["constraint_rate"] <= 1e-12
    # a wrong acceleration is caught
    bad = multiplier_residual(st, I, udot + 1e-3, xddot, lam)
    assert bad["euler_lagrange"] > 1e-4


def test_multiplier_solve_rejects_unconstrained_state(rng):
    p = random_point(3, rng)
    st = FullState(p.s, np.zeros(2), p.u, np.array([5.0, 5.0]))
    with pytest.raises(ValueError):
        multiplier_solve(st, InertiaTensor.identity(3))
    with pytest.raises(ValueError):
        integrate_constrained(st, InertiaTensor.identity(3), 0.1, 0.01)


def test_homogeneous_ball_needs_no_reaction(rng):
    p = random_point(4, rng)
    st = initial_full_state(p.s, p.u)
    _, xddot, lam = multiplier_solve(st, InertiaTensor.identity(4))
    assert np.max(np.abs(lam)) <= 1e-12 and np.max(np.abs(xddot)) <= 1e-12


@pytest.mark.parametrize("n", [3, 4])
def test_constrained_run_projects_onto_compressed(n, rng):
    p, I = random_point(n, rng), anisotropic(n, rng)
    T, dt = 2.0, 1e-3
    full = integrate_constrained(initial_full_state(p.s, p.u), I, T, dt, stride=10)
    comp = integrate(p, I, T, dt, stride=10)
    rep = compare_projection(full, comp)
    assert rep.passed and rep.max_deviation <= 1e-6
    assert full.max_projection <= 1e-9
    E = [full_energy(full.state(i), I) for i in range(len(full))]
    assert np.ptp(E) <= 1e-9
    # the compressed contact path reproduces the ambient one
    x = contact_path(integrate(p, I, T, dt))[::10]
    assert_allclose(x, full.x, atol=1e-8)


def test_batched_constrained_run_matches_single(rng):
    Is = [anisotropic(3, rng) for _ in range(2)]
    pts = [random_point(3, rng) for _ in range(2)]
    states = [initial_full_state(p.s, p.u) for p in pts]
    batch = integrate_constrained(states, Is, 0.2, 1e-2)
    for tr, st, I in zip(batch, states, Is):
        single = integrate_constrained(st, I, 0.2, 1e-2)
        assert_allclose(tr.u, single.u, atol=1e-13)


def test_projection_guard_trips(rng):
    p, I = random_point(3, rng), anisotropic(3, rng)
    with pytest.raises(ConstraintDriftError):
        integrate_constrained(initial_full_state(p.s, p.u), I, 1.0, 0.1, projection_guard=1e-20)


def test_compare_projection_grid_mismatch(rng):
    p, I = random_point(3, rng), InertiaTensor.identity(3)
    full = integrate_constrained(initial_full_state(p.s, p.u), I, 0.1, 0.01)
    with pytest.raises(ValueError):
        compare_projection(full, integrate(p, I, 0.1, 0.02))


def test_projection_detects_different_dynamics(rng):
    p = random_point(3, rng)
    I = anisotropic(3, rng)
    full = integrate_constrained(initial_full_state(p.s, p.u), I, 1.0, 1e-2)
    other = integrate(PhasePoint(p.s, p.u), InertiaTensor.identity(3), 1.0, 1e-2)
    assert not compare_projection(full, other).passed
