import numpy as np
import pytest

from rkhessian import (
    CostAttachment,
    adjoint_partner,
    integrate,
    integrate_coupled,
    make_tableau,
    sweep_first_order,
    sweep_naive,
    sweep_second_order,
)
from rkhessian.problems import PendulumSystem, pendulum

TABLEAUS = ["explicit-euler", "heun", "rk4", "implicit-euler"]


def quad_terminal():
    return CostAttachment(
        lambda n, x: float(x @ x),
        lambda n, x: 2.0 * x,
        lambda n, x, v: 2.0 * v,
    )


@pytest.mark.parametrize("name", TABLEAUS)
def test_gradient_pairing_and_conservation(name, rng):
    sys, cost = pendulum()
    t = make_tableau(name)
    traj = integrate(sys, t, [1.0, 1.0], 0.05, 12)
    res = sweep_first_order(traj, adjoint_partner(t), cost)
    gN = cost.grad(12, traj.nodes[-1])
    for _ in range(5):
        gamma = rng.standard_normal(2)
        ct = integrate_coupled(sys, t, [1.0, 1.0], gamma, 0.05, 12, x_traj=traj)
        pair = np.einsum("nd,nd->n", res.lam_nodes, ct.delta_nodes)
        ref = gN @ ct.delta_nodes[-1]
        assert np.max(np.abs(pair - ref)) <= 1e-12 * abs(ref)


@pytest.mark.parametrize("name", TABLEAUS)
def test_second_order_reuses_lambda(name):
    sys, cost = pendulum()
    t = make_tableau(name)
    at = adjoint_partner(t)
    traj = integrate(sys, t, [0.4, -0.3], 0.05, 10)
    first = sweep_first_order(traj, at, cost)
    ct = integrate_coupled(sys, t, None, [0.0, 1.0], 0.05, 10, x_traj=traj)
    fresh = sweep_second_order(ct, at, cost)
    cached = sweep_second_order(ct, at, cost, first)
    np.testing.assert_array_equal(fresh.xi0, cached.xi0)
    assert np.max(np.abs(fresh.lam0 - first.lam0)) <= 1e-14 * np.max(np.abs(first.lam0))


def test_cached_lambda_from_other_trajectory_rejected():
    sys, cost = pendulum()
    t = make_tableau("heun")
    at = adjoint_partner(t)
    first = sweep_first_order(integrate(sys, t, [0.1, 0.2], 0.1, 3), at, cost)
    ct = integrate_coupled(sys, t, [0.1, 0.2], [1.0, 0.0], 0.1, 3)
    with pytest.raises(ValueError):
        sweep_second_order(ct, at, cost, first)


def test_wrong_partner_rejected():
    sys, cost = pendulum()
    traj = integrate(sys, make_tableau("heun"), [0.1, 0.2], 0.1, 3)
    with pytest.raises(ValueError):
        sweep_first_order(traj, adjoint_partner(make_tableau("rk4")), cost)


def test_zero_direction_gives_zero_hvp():
    sys, cost = pendulum()
    t = make_tableau("rk4")
    ct = integrate_coupled(sys, t, [1.0, 1.0], [0.0, 0.0], 0.01, 5)
    res = sweep_second_order(ct, adjoint_partner(t), cost)
    np.testing.assert_array_equal(res.xi0, 0.0)


def test_hvp_is_linear_in_direction(rng):
    sys, cost = pendulum()
    t = make_tableau("heun")
    at = adjoint_partner(t)
    traj = integrate(sys, t, [1.0, 1.0], 0.02, 10)
    g1, g2 = rng.standard_normal(2), rng.standard_normal(2)

    def hv(g):
        return sweep_second_order(integrate_coupled(sys, t, None, g, 0.02, 10, x_traj=traj), at, cost).xi0

    np.testing.assert_allclose(hv(2.0 * g1 - 3.0 * g2), 2.0 * hv(g1) - 3.0 * hv(g2), rtol=1e-12, atol=1e-14)


def test_multi_node_cost_is_additive():
    sys = PendulumSystem()
    t = make_tableau("rk4")
    at = adjoint_partner(t)
    traj = integrate(sys, t, [0.8, 0.1], 0.1, 6)

    def single(node):
        return CostAttachment(lambda n, x: float(x @ x), lambda n, x: 2.0 * x, lambda n, x, v: 2.0 * v, (node,))

    both = CostAttachment(lambda n, x: float(x @ x), lambda n, x: 2.0 * x, lambda n, x, v: 2.0 * v, (2, 6))
    g = sweep_first_order(traj, at, both).lam0
    g2 = sweep_first_order(traj, at, single(2)).lam0 + sweep_first_order(traj, at, single(6)).lam0
    np.testing.assert_allclose(g, g2, rtol=1e-14)


def test_observation_beyond_end_rejected():
    cost = CostAttachment(lambda n, x: 0.0, lambda n, x: 0 * x, lambda n, x, v: 0 * v, (9,))
    traj = integrate(PendulumSystem(), make_tableau("heun"), [0.0, 1.0], 0.1, 3)
    with pytest.raises(ValueError):
        sweep_first_order(traj, adjoint_partner(make_tableau("heun")), cost)


def test_naive_first_order_differs_from_exact():
    sys, cost = pendulum()
    t = make_tableau("explicit-euler")
    traj = integrate(sys, t, [1.0, 1.0], 0.01, 5)
    exact = sweep_first_order(traj, adjoint_partner(t), cost).lam0
    naive = sweep_naive(traj, "explicit-euler", cost).lam0
    assert 1e-6 < np.max(np.abs(exact - naive)) < 1e-1


def test_naive_unknown_scheme():
    traj = integrate(PendulumSystem(), make_tableau("rk4"), [0.0, 1.0], 0.1, 3)
    with pytest.raises(ValueError):
        sweep_naive(traj, "rk4", quad_terminal())


def test_conservation_with_quadratic_terminal_cost(rng):
    sys = PendulumSystem()
    t = make_tableau("rk4")
    cost = quad_terminal()
    traj = integrate(sys, t, [2.0, -0.5], 0.1, 30)
    res = sweep_first_order(traj, adjoint_partner(t), cost)
    ct = integrate_coupled(sys, t, None, rng.standard_normal(2), 0.1, 30, x_traj=traj)
    pair = np.einsum("nd,nd->n", res.lam_nodes, ct.delta_nodes)
    assert np.ptp(pair) <= 1e-12 * np.max(np.abs(pair))
