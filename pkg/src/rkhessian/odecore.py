"""ODE systems with derivative actions and forward Runge-Kutta integration.

The forward sweeps store every node and stage value because the backward
sweeps in :mod:`rkhessian.adjoint` evaluate derivatives exactly there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .tableau import ButcherTableau

__all__ = [
    "OdeSystem",
    "CoupledSystem",
    "Trajectory",
    "CoupledTrajectory",
    "NonFiniteError",
    "NewtonConvergenceError",
    "integrate",
    "coupled_system",
    "integrate_coupled",
    "NEWTON_TOL",
    "NEWTON_MAXITER",
]

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50


class NonFiniteError(FloatingPointError):
    """A forward or backward sweep produced inf/nan."""


class NewtonConvergenceError(RuntimeError):
    """Implicit stage solve failed to reach the residual tolerance."""


class OdeSystem:
    """Autonomous system ``dx/dt = f(x)`` with first and second derivative actions.

    Subclasses implement ``f``, ``jvp``, ``vjp`` and ``so_vjp``.  ``jacobian``
    defaults to assembling columns from ``jvp``; override it when a cheaper
    dense form is available (only implicit schemes need it).
    """

    dim: int

    def f(self, x):
        raise NotImplementedError

    def jvp(self, x, v):
        """``(df/dx)(x) @ v``"""
        raise NotImplementedError

    def vjp(self, x, w):
        """``(df/dx)(x).T @ w``"""
        raise NotImplementedError

    def so_vjp(self, x, delta, lam):
        """``(d/dx [(df/dx)(x) @ delta]).T @ lam``"""
        raise NotImplementedError

    def jacobian(self, x):
        eye = np.eye(self.dim)
        return np.column_stack([self.jvp(x, eye[:, j]) for j in range(self.dim)])


class CoupledSystem(OdeSystem):
    """State plus variational equation, ``y = (x, delta)``, ``g = (f(x), J(x) delta)``.

    ``vjp`` applies ``(dg/dy).T`` to ``phi = (xi, lam)``; it is block upper
    triangular so the ``lam`` output never depends on ``xi``.
    """

    def __init__(self, base: OdeSystem):
        self.base = base
        self.dim = 2 * base.dim

    def _split(self, y):
        d = self.base.dim
        return y[:d], y[d:]

    def f(self, y):
        x, delta = self._split(y)
        return np.concatenate([self.base.f(x), self.base.jvp(x, delta)])

    def jvp(self, y, v):
        x, delta = self._split(y)
        vx, vd = self._split(v)
        return np.concatenate(
            [self.base.jvp(x, vx), self.base.jvp(x, vd) + self._hess_action(x, delta, vx)]
        )

    def _hess_action(self, x, delta, vx):
        # (d/dx (J delta)) vx assembled row by row from so_vjp; O(d) calls,
        # only used for diagnostics, the sweeps never need the forward action
        d = self.base.dim
        eye = np.eye(d)
        return np.array([self.base.so_vjp(x, delta, eye[i]) @ vx for i in range(d)])

    def vjp(self, y, phi):
        x, delta = self._split(y)
        xi, lam = self._split(phi)
        base = self.base
        return np.concatenate([base.vjp(x, xi) + base.so_vjp(x, delta, lam), base.vjp(x, lam)])

    def so_vjp(self, y, delta, lam):  # pragma: no cover - never needed
        raise NotImplementedError("third derivatives are not available")


def coupled_system(sys: OdeSystem) -> CoupledSystem:
    return CoupledSystem(sys)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Forward solution: ``nodes[n]`` is ``x_n``; ``stages[n, i]`` is ``X_{n,i}``.

    For implicit Euler the single stage equals ``x_{n+1}``.
    """

    system: OdeSystem
    tableau: ButcherTableau
    h: float
    nodes: np.ndarray
    stages: np.ndarray

    @property
    def N(self) -> int:
        return self.nodes.shape[0] - 1


@dataclass(frozen=True, eq=False)
class CoupledTrajectory:
    """Forward solution of the state/variational pair.

    ``x`` is the :class:`Trajectory` that was reused (bitwise) for the state
    part; ``delta_nodes``/``delta_stages`` hold the variational part.
    """

    x: Trajectory
    delta_nodes: np.ndarray
    delta_stages: np.ndarray

    @property
    def N(self) -> int:
        return self.x.N

    @property
    def h(self) -> float:
        return self.x.h

    @property
    def tableau(self) -> ButcherTableau:
        return self.x.tableau

    @property
    def system(self) -> OdeSystem:
        return self.x.system


def _check_finite(v, n, what):
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"non-finite {what} at step {n}")


def _newton_step(sys, xn, h, n, tol, maxiter):
    """Solve ``z = xn + h f(z)`` by full Newton from ``z = xn``."""
    z = xn.copy()
    eye = np.eye(sys.dim)
    for _ in range(maxiter + 1):
        res = z - xn - h * sys.f(z)
        if np.max(np.abs(res)) <= tol:
            return z
        jac = eye - h * sys.jacobian(z)
        z = z - np.linalg.solve(jac, res)
        _check_finite(z, n, "Newton iterate")
    raise NewtonConvergenceError(
        f"implicit Euler Newton did not converge at step {n} "
        f"(residual {np.max(np.abs(res)):.3e} > {tol:.1e})"
    )


def integrate(
    sys: OdeSystem,
    t: ButcherTableau,
    x0,
    h: float,
    N: int,
    *,
    newton_tol: float = NEWTON_TOL,
    newton_maxiter: int = NEWTON_MAXITER,
) -> Trajectory:
    """Run ``N`` steps of size ``h`` and keep all nodes and stages."""
    if not h > 0:
        raise ValueError("step size must be positive")
    if N < 0:
        raise ValueError("number of steps must be non-negative")
    x0 = np.array(x0, dtype=np.float64).ravel()
    d, s = x0.size, t.s
    nodes = np.empty((N + 1, d))
    stages = np.empty((N, s, d))
    nodes[0] = x0
    _check_finite(x0, 0, "initial state")
    a, b = t.a, t.b
    for n in range(N):
        xn = nodes[n]
        if t.explicit:
            k = np.empty((s, d))
            for i in range(s):
                Xi = xn.copy()
                for j in range(i):
                    if a[i, j] != 0.0:
                        Xi += h * a[i, j] * k[j]
                stages[n, i] = Xi
                k[i] = sys.f(Xi)
            xnext = xn.copy()
            for i in range(s):
                xnext += h * b[i] * k[i]
        else:
            xnext = _newton_step(sys, xn, h, n, newton_tol, newton_maxiter)
            stages[n, 0] = xnext
        _check_finite(xnext, n + 1, "state")
        nodes[n + 1] = xnext
    nodes.flags.writeable = False
    stages.flags.writeable = False
    return Trajectory(sys, t, float(h), nodes, stages)


def integrate_coupled(
    sys: OdeSystem,
    t: ButcherTableau,
    theta,
    gamma,
    h: float,
    N: int,
    *,
    x_traj: Trajectory | None = None,
    lu_cache: list | None = None,
) -> CoupledTrajectory:
    """Integrate ``(x, delta)`` from ``(theta, gamma)``.

    Pass ``x_traj`` to reuse an existing state trajectory (its stages are
    used as-is).  For implicit Euler ``lu_cache`` may hold per-step LU
    factors of ``I - h J(x_{n+1})``; it is filled on first use.
    """
    if x_traj is None:
        x_traj = integrate(sys, t, theta, h, N)
    elif x_traj.N != N or x_traj.h != h or x_traj.tableau is not t:
        raise ValueError("cached state trajectory does not match h/N/tableau")
    gamma = np.array(gamma, dtype=np.float64).ravel()
    d, s = gamma.size, t.s
    if d != x_traj.nodes.shape[1]:
        raise ValueError("direction has wrong dimension")
    dnodes = np.empty((N + 1, d))
    dstages = np.empty((N, s, d))
    dnodes[0] = gamma
    a, b = t.a, t.b
    X = x_traj.stages
    if not t.explicit:
        factors = implicit_factors(x_traj, lu_cache)
    for n in range(N):
        dn = dnodes[n]
        if t.explicit:
            k = np.empty((s, d))
            for i in range(s):
                Di = dn.copy()
                for j in range(i):
                    if a[i, j] != 0.0:
                        Di += h * a[i, j] * k[j]
                dstages[n, i] = Di
                k[i] = sys.jvp(X[n, i], Di)
            dnext = dn.copy()
            for i in range(s):
                dnext += h * b[i] * k[i]
        else:
            dnext = sla.lu_solve(factors[n], dn, check_finite=False)
            dstages[n, 0] = dnext
        _check_finite(dnext, n + 1, "variational state")
        dnodes[n + 1] = dnext
    dnodes.flags.writeable = False
    dstages.flags.writeable = False
    return CoupledTrajectory(x_traj, dnodes, dstages)


def implicit_factors(x_traj: Trajectory, cache: list | None = None) -> list:
    """LU factors of ``I - h J(x_{n+1})`` for every implicit Euler step.

    The same factors serve forward variational solves and (transposed)
    backward adjoint solves.
    """
    if cache is not None and len(cache) == x_traj.N:
        return cache
    sys, h = x_traj.system, x_traj.h
    eye = np.eye(sys.dim)
    out = []
    for n in range(x_traj.N):
        M = eye - h * sys.jacobian(x_traj.nodes[n + 1])
        lu, piv = sla.lu_factor(M, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            raise np.linalg.LinAlgError(f"singular implicit step matrix at step {n}")
        out.append((lu, piv))
    if cache is not None:
        cache[:] = out
    return out
