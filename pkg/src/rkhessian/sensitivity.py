"""Gradients and Hessian-vector products of costs of Runge-Kutta solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .adjoint import (
    AdjointSweepResult,
    CostAttachment,
    naive_arrays,
    sweep_first_order,
    sweep_naive,
    sweep_second_order,
)
from .odecore import OdeSystem, Trajectory, integrate, integrate_coupled
from .tableau import ButcherTableau, adjoint_partner

__all__ = [
    "LinearOperator",
    "DenseOperator",
    "ShiftedOperator",
    "GradientCache",
    "HvpOperator",
    "gradient",
    "make_hvp_operator",
    "assemble_hessian",
    "fd_gradient_oracle",
    "fd_hvp_oracle",
]

MODES = ("exact", "naive")


@runtime_checkable
class LinearOperator(Protocol):
    dim: int

    def apply(self, v: np.ndarray) -> np.ndarray: ...


class DenseOperator:
    """Wrap an explicit square matrix as a :class:`LinearOperator`."""

    def __init__(self, M):
        self.M = np.asarray(M, dtype=np.float64)
        if self.M.ndim != 2 or self.M.shape[0] != self.M.shape[1]:
            raise ValueError("operator matrix must be square")
        self.dim = self.M.shape[0]

    def apply(self, v):
        return self.M @ v


class ShiftedOperator:
    """``v -> op.apply(v) + mu * v``."""

    def __init__(self, op: LinearOperator, mu: float):
        self.op = op
        self.mu = float(mu)
        self.dim = op.dim

    def apply(self, v):
        return self.op.apply(v) + self.mu * v


@dataclass(frozen=True, eq=False)
class GradientCache:
    """Forward trajectory and first-order sweep kept for HVP reuse."""

    x_traj: Trajectory
    lam_sweep: AdjointSweepResult
    lu: list


def _full_state_direction(theta, v, sl):
    if sl is None:
        return np.asarray(v, dtype=np.float64)
    g = np.zeros_like(theta)
    g[sl] = v
    return g


def gradient(
    sys: OdeSystem,
    cost: CostAttachment,
    t: ButcherTableau,
    theta,
    h: float,
    N: int,
) -> tuple[np.ndarray, GradientCache]:
    """Exact gradient of the discrete cost with respect to the initial state."""
    at = adjoint_partner(t)
    traj = integrate(sys, t, theta, h, N)
    lu: list = []
    res = sweep_first_order(traj, at, cost, lu_cache=lu)
    return res.lam0.copy(), GradientCache(traj, res, lu)


class HvpOperator:
    """Matrix-free ``gamma -> H gamma`` for the discrete cost.

    In ``exact`` mode the state trajectory, implicit-step LU factors and the
    lambda sweep are computed once; each :meth:`apply` does one forward
    variational sweep and one backward xi sweep.  In ``naive`` mode each
    apply runs the comparison scheme on the full coupled adjoint.

    ``param_slice`` restricts the operator to a block of the state (the
    direction is zero-padded, the output sliced).  ``backward_evals`` counts
    backward sweeps: one per apply plus one for the gradient when requested.
    """

    def __init__(
        self,
        sys: OdeSystem,
        cost: CostAttachment,
        t: ButcherTableau,
        theta,
        h: float,
        N: int,
        mode: str = "exact",
        *,
        param_slice: slice | None = None,
        cache: GradientCache | None = None,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.system, self.cost, self.tableau = sys, cost, t
        self.theta = np.array(theta, dtype=np.float64)
        self.h, self.N, self.mode = float(h), int(N), mode
        self.param_slice = param_slice
        self.dim = self.theta.size if param_slice is None else len(
            range(*param_slice.indices(self.theta.size))
        )
        self.backward_evals = 0
        self.apply_count = 0
        self._gradient = None
        if mode == "exact":
            self.partner = adjoint_partner(t)
            if cache is None:
                _, cache = gradient(sys, cost, t, self.theta, h, N)
                self.backward_evals += 1
            self.x_traj = cache.x_traj
            self._lam = cache.lam_sweep
            self._lu = cache.lu
            self._gradient = cache.lam_sweep.lam0
        else:
            self.partner = None
            self.x_traj = integrate(sys, t, self.theta, h, N)
            self._lam = None
            self._lu = []

    @property
    def gradient(self) -> np.ndarray:
        """Gradient in the same mode (naive mode computes it on first access)."""
        if self._gradient is None:
            lam, _ = naive_arrays(self.x_traj, None, self.tableau.name, self.cost)
            self._gradient = lam[0]
            self.backward_evals += 1
        g = self._gradient
        return (g if self.param_slice is None else g[self.param_slice]).copy()

    def cost_value(self) -> float:
        return self.cost.total(self.x_traj)

    def apply(self, v) -> np.ndarray:
        gamma = _full_state_direction(self.theta, v, self.param_slice)
        ctraj = integrate_coupled(
            self.system,
            self.tableau,
            self.theta,
            gamma,
            self.h,
            self.N,
            x_traj=self.x_traj,
            lu_cache=self._lu,
        )
        if self.mode == "exact":
            res = sweep_second_order(ctraj, self.partner, self.cost, self._lam, lu_cache=self._lu)
        else:
            res = sweep_naive(ctraj, self.tableau.name, self.cost)
        self.apply_count += 1
        self.backward_evals += 1
        out = res.xi0
        return (out if self.param_slice is None else out[self.param_slice]).copy()

    __call__ = apply
    matvec = apply


def make_hvp_operator(sys, cost, t, theta, h, N, mode="exact", **kwargs) -> HvpOperator:
    return HvpOperator(sys, cost, t, theta, h, N, mode, **kwargs)


def assemble_hessian(op: LinearOperator, d: int | None = None) -> np.ndarray:
    """Dense matrix whose column ``j`` is ``op.apply(e_j)``."""
    d = op.dim if d is None else d
    H = np.empty((d, d))
    e = np.zeros(d)
    for j in range(d):
        e[j] = 1.0
        H[:, j] = op.apply(e)
        e[j] = 0.0
    return H


def _discrete_cost(sys, cost, t, theta, h, N):
    return cost.total(integrate(sys, t, theta, h, N))


def fd_gradient_oracle(sys, cost, t, theta, h, N, eps=1e-6, *, param_slice=None):
    """Central-difference gradient of the discrete cost (one pair of runs per entry)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    theta = np.array(theta, dtype=np.float64)
    idx = np.arange(theta.size) if param_slice is None else np.arange(theta.size)[param_slice]
    out = np.empty(idx.size)
    for k, i in enumerate(idx):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += eps
        tm[i] -= eps
        out[k] = (
            _discrete_cost(sys, cost, t, tp, h, N) - _discrete_cost(sys, cost, t, tm, h, N)
        ) / (2 * eps)
    return out


def fd_hvp_oracle(sys, cost, t, theta, gamma, h, N, eps=1e-5, *, param_slice=None):
    """``(grad(theta + eps g) - grad(theta - eps g)) / (2 eps)`` with exact adjoint gradients."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    theta = np.array(theta, dtype=np.float64)
    g = _full_state_direction(theta, gamma, param_slice)
    gp, _ = gradient(sys, cost, t, theta + eps * g, h, N)
    gm, _ = gradient(sys, cost, t, theta - eps * g, h, N)
    out = (gp - gm) / (2 * eps)
    return out if param_slice is None else out[param_slice]
