import numpy as np
import pytest

from rkhessian import make_tableau
from rkhessian.problems import allen_cahn, pendulum, wave


@pytest.fixture(scope="session")
def pendulum_case():
    sys, cost = pendulum()
    return dict(sys=sys, cost=cost, t=make_tableau("explicit-euler"), theta=np.array([1.0, 1.0]), h=0.01, N=5)


@pytest.fixture(scope="session")
def small_allen_cahn_case():
    t = make_tableau("implicit-euler")
    sys, cost = allen_cahn(d=12, beta=0.01, h=0.001, N=8, tableau=t)
    return dict(sys=sys, cost=cost, t=t, theta=1.05 * sys.theta_hat, h=0.001, N=8)


@pytest.fixture(scope="session")
def small_wave_case():
    t = make_tableau("heun")
    T_obs = [0.2 * j for j in range(4)]
    sys, cost, W_true = wave(L=8.0, d=8, T_obs=T_obs, h=0.1, tableau=t)
    theta = sys.initial_state(W_true + 0.1 * np.cos(np.arange(8)))
    return dict(sys=sys, cost=cost, t=t, theta=theta, h=0.1, N=sys.n_steps, W_true=W_true)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
