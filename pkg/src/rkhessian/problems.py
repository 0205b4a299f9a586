"""Benchmark systems: simple pendulum, semi-discrete Allen-Cahn, periodic wave."""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .adjoint import CostAttachment
from .odecore import OdeSystem, integrate
from .tableau import ButcherTableau, make_tableau

__all__ = [
    "PendulumSystem",
    "AllenCahnSystem",
    "WaveSystem",
    "pendulum",
    "allen_cahn",
    "wave",
    "obs_nodes_for",
    "w_true_default",
]


class PendulumSystem(OdeSystem):
    """``Q' = P``, ``P' = -sin Q``."""

    dim = 2

    def f(self, x):
        return np.array([x[1], -math.sin(x[0])])

    def jvp(self, x, v):
        return np.array([v[1], -math.cos(x[0]) * v[0]])

    def vjp(self, x, w):
        return np.array([-math.cos(x[0]) * w[1], w[0]])

    def so_vjp(self, x, delta, lam):
        return np.array([math.sin(x[0]) * delta[0] * lam[1], 0.0])

    def jacobian(self, x):
        return np.array([[0.0, 1.0], [-math.cos(x[0]), 0.0]])


def _pendulum_cost_value(n, x):
    Q, P = x
    return Q * Q + Q * P + P * P + P**4


def _pendulum_cost_grad(n, x):
    Q, P = x
    return np.array([2.0 * Q + P, Q + 2.0 * P + 4.0 * P**3])


def _pendulum_cost_hessvec(n, x, v):
    P = x[1]
    return np.array([2.0 * v[0] + v[1], v[0] + (2.0 + 12.0 * P * P) * v[1]])


def pendulum():
    """Pendulum with terminal cost ``Q^2 + QP + P^2 + P^4``."""
    cost = CostAttachment(_pendulum_cost_value, _pendulum_cost_grad, _pendulum_cost_hessvec)
    return PendulumSystem(), cost


class AllenCahnSystem(OdeSystem):
    """Allen-Cahn ``psi_t = alpha psi + beta psi_zz + kappa psi^3`` on [0, 1].

    Neumann boundaries; second-order central differences with ``d`` points
    and ``dz = 1/(d-1)``.
    """

    def __init__(self, d: int, alpha: float, beta: float, kappa: float):
        if d < 3:
            raise ValueError("Allen-Cahn grid needs at least 3 points")
        self.dim = d
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.kappa = float(kappa)
        self.dz = 1.0 / (d - 1)
        self.c = self.beta / self.dz**2
        lap = np.zeros((d, d))
        i = np.arange(1, d - 1)
        lap[i, i - 1] = 1.0
        lap[i, i] = -2.0
        lap[i, i + 1] = 1.0
        lap[0, 0], lap[0, 1] = -2.0, 2.0
        lap[d - 1, d - 2], lap[d - 1, d - 1] = 2.0, -2.0
        self._lap_c = self.c * lap

    def f(self, x):
        return _kernels.ACTIVE.ac_rhs(x, self.alpha, self.c, self.kappa)

    def jvp(self, x, v):
        return _kernels.ACTIVE.ac_jvp(x, v, self.alpha, self.c, self.kappa)

    def vjp(self, x, w):
        return _kernels.ACTIVE.ac_vjp(x, w, self.alpha, self.c, self.kappa)

    def so_vjp(self, x, delta, lam):
        return 6.0 * self.kappa * x * delta * lam

    def jacobian(self, x):
        jac = self._lap_c.copy()
        jac[np.diag_indices(self.dim)] += self.alpha + 3.0 * self.kappa * (x * x)
        return jac


def allen_cahn(
    d: int = 150,
    alpha: float = 10.0,
    beta: float = 0.001,
    kappa: float = -1.0,
    theta_hat=None,
    *,
    h: float = 0.001,
    N: int = 20,
    tableau: ButcherTableau | None = None,
):
    """Allen-Cahn system plus terminal misfit ``||Psi_N - Psi_N(theta_hat)||^2``.

    The target is produced with the same integrator settings, so the cost
    vanishes at ``theta_hat``.  Default ``theta_hat`` is ``cos(pi z)``.
    """
    sys = AllenCahnSystem(d, alpha, beta, kappa)
    if theta_hat is None:
        z = np.arange(d) * sys.dz
        theta_hat = np.cos(np.pi * z)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    tableau = tableau or make_tableau("implicit-euler")
    target = integrate(sys, tableau, theta_hat, h, N).nodes[N].copy()
    sys.theta_hat = theta_hat
    sys.target = target

    def value(n, x):
        r = x - target
        return float(r @ r)

    def grad(n, x):
        return 2.0 * (x - target)

    def hessvec(n, x, v):
        return 2.0 * v

    return sys, CostAttachment(value, grad, hessvec)


class WaveSystem(OdeSystem):
    """Periodic inhomogeneous wave equation on a staggered grid.

    State is ``(U, V, W)`` with ``U' = V``,
    ``V'_m = (W_m (U_{m+1} - U_m) - W_{m-1} (U_m - U_{m-1})) / dz^2`` and
    ``W' = 0``; ``W_m`` lives at ``z = (m + 1/2) dz`` (0-based), indices mod ``d``.
    """

    def __init__(self, d: int, L: float):
        self.d = d
        self.L = float(L)
        self.dim = 3 * d
        self.dz = self.L / d
        self.inv_dz2 = 1.0 / self.dz**2
        z = np.arange(d) * self.dz
        self.U0 = 16.0 * z**2 * (self.L - z) ** 2 / self.L**4
        self.V0 = np.zeros(d)
        self.param_slice = slice(2 * d, 3 * d)

    def initial_state(self, W):
        return np.concatenate([self.U0, self.V0, np.asarray(W, dtype=np.float64)])

    def f(self, x):
        return _kernels.ACTIVE.wave_rhs(x, self.inv_dz2)

    def jvp(self, x, v):
        return _kernels.ACTIVE.wave_jvp(x, v, self.inv_dz2)

    def vjp(self, x, w):
        return _kernels.ACTIVE.wave_vjp(x, w, self.inv_dz2)

    def so_vjp(self, x, delta, lam):
        return _kernels.ACTIVE.wave_so_vjp(x, delta, lam, self.inv_dz2)


def w_true_default(L: float = 64.0):
    return lambda z: 0.5 + 0.25 * np.sin(4.0 * np.pi * z / L)


def obs_nodes_for(T_obs, h: float, rtol: float = 1e-9) -> tuple[int, ...]:
    """Map observation times to node indices; raise if any is off the grid."""
    nodes = []
    for t in T_obs:
        q = t / h
        k = round(q)
        if abs(q - k) > rtol * max(1.0, abs(q)):
            raise ValueError(f"observation time {t} is not a multiple of h={h}")
        nodes.append(int(k))
    return tuple(sorted(set(nodes)))


def wave(
    L: float = 64.0,
    d: int = 64,
    w_true_fn=None,
    T_obs=None,
    h: float = 0.2,
    *,
    tableau: ButcherTableau | None = None,
):
    """Wave inversion problem; returns ``(system, cost, W_true)``.

    Observations of ``U`` are simulated at ``W_true`` with the same scheme and
    step, so the cost is exactly zero there.  The trajectory length is
    ``max(cost.obs_nodes)``.
    """
    if T_obs is None:
        T_obs = [0.2 * j for j in range(11)]
    w_true_fn = w_true_fn or w_true_default(L)
    tableau = tableau or make_tableau("heun")
    sys = WaveSystem(d, L)
    nodes = obs_nodes_for(T_obs, h)
    N = max(nodes)
    W_true = np.asarray(w_true_fn((np.arange(d) + 0.5) * sys.dz), dtype=np.float64)
    traj = integrate(sys, tableau, sys.initial_state(W_true), h, N)
    U_obs = {n: traj.nodes[n, :d].copy() for n in nodes}

    def value(n, x):
        r = x[:d] - U_obs[n]
        return float(r @ r)

    def grad(n, x):
        g = np.zeros(3 * d)
        g[:d] = 2.0 * (x[:d] - U_obs[n])
        return g

    def hessvec(n, x, v):
        out = np.zeros(3 * d)
        out[:d] = 2.0 * v[:d]
        return out

    sys.n_steps = N
    return sys, CostAttachment(value, grad, hessvec, nodes), W_true
