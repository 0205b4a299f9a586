"""Backward sweeps for first-order and coupled second-order adjoints.

Exact mode integrates the adjoint with the symplectic partner of the forward
tableau, written in backward form::

    Phi_i  = phi_{n+1} + h * sum_j D[i, j] * qbar_j
    qbar_i = (dg/dy)(Y_i).T @ Phi_i
    phi_n  = phi_{n+1} + h * sum_i B[i] * qbar_i

For explicit forward tableaus ``D`` is strictly upper triangular, so the
stages are evaluated in reverse order.  For implicit Euler the single stage
is a linear solve with ``(I - h J(x_{n+1})).T``.

Naive mode reproduces three textbook backward discretisations used as
comparison baselines; they do not give derivatives of the discrete flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .odecore import CoupledTrajectory, NonFiniteError, Trajectory, implicit_factors
from .tableau import AdjointTableau, verify_partner

__all__ = [
    "CostAttachment",
    "AdjointSweepResult",
    "sweep_first_order",
    "sweep_second_order",
    "sweep_naive",
    "NAIVE_SCHEMES",
]

NAIVE_SCHEMES = ("explicit-euler", "implicit-euler", "heun")


@dataclass(frozen=True, eq=False)
class CostAttachment:
    """Cost ``C = sum_{n in nodes} value(n, x_n)`` over trajectory nodes.

    ``obs_nodes=None`` means a terminal cost at node ``N`` only.  ``grad`` and
    ``hessvec`` return the gradient and Hessian-vector product of the
    per-node term with respect to ``x_n``.
    """

    value: Callable[[int, np.ndarray], float]
    grad: Callable[[int, np.ndarray], np.ndarray]
    hessvec: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    obs_nodes: tuple[int, ...] | None = None

    def nodes(self, N: int) -> tuple[int, ...]:
        if self.obs_nodes is None:
            return (N,)
        if self.obs_nodes and max(self.obs_nodes) > N:
            raise ValueError(
                f"cost observes node {max(self.obs_nodes)} beyond trajectory end {N}"
            )
        return self.obs_nodes

    def total(self, traj: Trajectory) -> float:
        """Evaluate the cost on a stored trajectory."""
        return float(sum(self.value(n, traj.nodes[n]) for n in self.nodes(traj.N)))


@dataclass(frozen=True, eq=False)
class AdjointSweepResult:
    """Output of one backward sweep.

    ``lam_nodes[n]`` is ``lambda_n`` after any injection at node ``n``;
    ``lam_stages[n, i]`` is the stage value ``Lambda_{n,i}``.  ``xi_*`` are
    ``None`` for first-order sweeps.
    """

    lam_nodes: np.ndarray
    lam_stages: np.ndarray | None
    xi_nodes: np.ndarray | None
    x_traj: Trajectory
    backward_eval_count: int = 1

    @property
    def lam0(self) -> np.ndarray:
        return self.lam_nodes[0]

    @property
    def xi0(self) -> np.ndarray | None:
        return None if self.xi_nodes is None else self.xi_nodes[0]


def _check_partner(traj: Trajectory, at: AdjointTableau):
    t = traj.tableau
    if at.source is t:
        return
    if at.s != t.s or not verify_partner(t, at, 1e-14):
        raise ValueError("adjoint tableau is not the partner of the trajectory tableau")


def _finite(v, n, what):
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"non-finite {what} at backward step {n}")


def _lambda_sweep(traj: Trajectory, at: AdjointTableau, cost: CostAttachment, lu_cache):
    sys, h, N = traj.system, traj.h, traj.N
    d, s = traj.nodes.shape[1], at.s
    obs = set(cost.nodes(N))
    X, xs = traj.stages, traj.nodes
    B, D = at.B, at.D
    lam = np.empty((N + 1, d))
    Lam = np.empty((N, s, d))
    lam[N] = cost.grad(N, xs[N]) if N in obs else 0.0
    explicit = traj.tableau.explicit
    if not explicit:
        factors = implicit_factors(traj, lu_cache)
    for n in range(N - 1, -1, -1):
        nxt = lam[n + 1]
        if explicit:
            qbar = [None] * s
            for i in range(s - 1, -1, -1):
                Li = nxt.copy()
                for j in range(i + 1, s):
                    if D[i, j] != 0.0:
                        Li += h * D[i, j] * qbar[j]
                Lam[n, i] = Li
                qbar[i] = sys.vjp(X[n, i], Li)
            cur = nxt.copy()
            for i in range(s):
                cur += h * B[i] * qbar[i]
        else:
            cur = sla.lu_solve(factors[n], nxt, trans=1, check_finite=False)
            Lam[n, 0] = cur
        if n in obs:
            cur = cur + cost.grad(n, xs[n])
        _finite(cur, n, "adjoint")
        lam[n] = cur
    return lam, Lam


def _xi_sweep(ctraj: CoupledTrajectory, at: AdjointTableau, cost, Lam, lu_cache):
    traj = ctraj.x
    sys, h, N = traj.system, traj.h, traj.N
    d, s = traj.nodes.shape[1], at.s
    obs = set(cost.nodes(N))
    X, xs = traj.stages, traj.nodes
    Dl, dn = ctraj.delta_stages, ctraj.delta_nodes
    B, D = at.B, at.D
    xi = np.empty((N + 1, d))
    xi[N] = cost.hessvec(N, xs[N], dn[N]) if N in obs else 0.0
    explicit = traj.tableau.explicit
    if not explicit:
        factors = implicit_factors(traj, lu_cache)
    for n in range(N - 1, -1, -1):
        nxt = xi[n + 1]
        if explicit:
            qbar = [None] * s
            for i in range(s - 1, -1, -1):
                Xi = nxt.copy()
                for j in range(i + 1, s):
                    if D[i, j] != 0.0:
                        Xi += h * D[i, j] * qbar[j]
                qbar[i] = sys.vjp(X[n, i], Xi) + sys.so_vjp(X[n, i], Dl[n, i], Lam[n, i])
            cur = nxt.copy()
            for i in range(s):
                cur += h * B[i] * qbar[i]
        else:
            rhs = nxt + h * sys.so_vjp(X[n, 0], Dl[n, 0], Lam[n, 0])
            cur = sla.lu_solve(factors[n], rhs, trans=1, check_finite=False)
        if n in obs:
            cur = cur + cost.hessvec(n, xs[n], dn[n])
        _finite(cur, n, "second-order adjoint")
        xi[n] = cur
    return xi


def sweep_first_order(
    traj: Trajectory, at: AdjointTableau, cost: CostAttachment, *, lu_cache=None
) -> AdjointSweepResult:
    """Exact discrete gradient sweep; ``result.lam0`` is ``dC/dx_0``."""
    _check_partner(traj, at)
    lam, Lam = _lambda_sweep(traj, at, cost, lu_cache)
    lam.flags.writeable = False
    Lam.flags.writeable = False
    return AdjointSweepResult(lam, Lam, None, traj)


def sweep_second_order(
    ctraj: CoupledTrajectory,
    at: AdjointTableau,
    cost: CostAttachment,
    cached_lambda: AdjointSweepResult | None = None,
    *,
    lu_cache=None,
) -> AdjointSweepResult:
    """Coupled ``(xi, lambda)`` sweep; ``xi0`` is the Hessian-vector product.

    The lambda block does not depend on xi, so a previous first-order result
    for the same state trajectory and cost can be passed as ``cached_lambda``
    and only the xi block is integrated.
    """
    _check_partner(ctraj.x, at)
    if cached_lambda is None:
        lam, Lam = _lambda_sweep(ctraj.x, at, cost, lu_cache)
    else:
        if cached_lambda.x_traj is not ctraj.x or cached_lambda.lam_stages is None:
            raise ValueError("cached lambda sweep was computed on a different trajectory")
        lam, Lam = cached_lambda.lam_nodes, cached_lambda.lam_stages
    xi = _xi_sweep(ctraj, at, cost, Lam, lu_cache)
    xi.flags.writeable = False
    return AdjointSweepResult(lam, Lam, xi, ctraj.x)


def _naive_coupled_vjp(sys, x, delta, xi, lam):
    q_lam = sys.vjp(x, lam)
    if xi is None:
        return None, q_lam
    return sys.vjp(x, xi) + sys.so_vjp(x, delta, lam), q_lam


def naive_arrays(traj: Trajectory, delta_nodes, scheme: str, cost: CostAttachment):
    """Run a naive backward scheme; ``delta_nodes=None`` skips the xi block."""
    if scheme not in NAIVE_SCHEMES:
        raise ValueError(f"no naive comparison scheme for {scheme!r}")
    sys, h, N = traj.system, traj.h, traj.N
    xs = traj.nodes
    d = xs.shape[1]
    obs = set(cost.nodes(N))
    second = delta_nodes is not None
    lam = np.empty((N + 1, d))
    xi = np.empty((N + 1, d)) if second else None
    lam[N] = cost.grad(N, xs[N]) if N in obs else 0.0
    if second:
        xi[N] = cost.hessvec(N, xs[N], delta_nodes[N]) if N in obs else 0.0
    dnode = (lambda n: delta_nodes[n]) if second else (lambda n: None)
    for n in range(N - 1, -1, -1):
        l1 = lam[n + 1]
        x1 = xi[n + 1] if second else None
        q2x, q2l = _naive_coupled_vjp(sys, xs[n + 1], dnode(n + 1), x1, l1)
        if scheme == "heun":
            P1x = x1 + h * q2x if second else None
            P1l = l1 + h * q2l
            q1x, q1l = _naive_coupled_vjp(sys, xs[n], dnode(n), P1x, P1l)
            cur_l = l1 + (h / 2) * (q1l + q2l)
            cur_x = x1 + (h / 2) * (q1x + q2x) if second else None
        else:
            cur_l = l1 + h * q2l
            cur_x = x1 + h * q2x if second else None
        if n in obs:
            cur_l = cur_l + cost.grad(n, xs[n])
            if second:
                cur_x = cur_x + cost.hessvec(n, xs[n], delta_nodes[n])
        _finite(cur_l, n, "adjoint")
        lam[n] = cur_l
        if second:
            _finite(cur_x, n, "second-order adjoint")
            xi[n] = cur_x
    return lam, xi


def sweep_naive(
    ctraj: CoupledTrajectory | Trajectory, scheme: str, cost: CostAttachment
) -> AdjointSweepResult:
    """Comparison sweep evaluating ``(dg/dy).T`` at nodes instead of stages.

    ``explicit-euler`` and ``implicit-euler`` both use
    ``phi_n = phi_{n+1} + h (dg/dy)(y_{n+1}).T phi_{n+1}``; ``heun`` uses the
    Heun method run backward with node values.  Passing a plain
    :class:`Trajectory` performs the first-order (lambda-only) sweep.
    """
    if isinstance(ctraj, CoupledTrajectory):
        traj, dn = ctraj.x, ctraj.delta_nodes
    else:
        traj, dn = ctraj, None
    lam, xi = naive_arrays(traj, dn, scheme, cost)
    return AdjointSweepResult(lam, None, xi, traj)
