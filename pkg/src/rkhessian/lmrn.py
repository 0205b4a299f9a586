"""Levenberg-Marquardt regularised Newton iteration with matrix-free CR solves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .krylov import conjugate_residual
from .odecore import integrate
from .sensitivity import HvpOperator, ShiftedOperator

__all__ = ["LmrnState", "lmrn_minimize", "count_backward_evals"]

log = logging.getLogger(__name__)

MU_SHRINK = 0.25
MU_GROW = 4.0
ACCEPT_RATIO = 0.1
MU_MAX = 1e20


@dataclass
class LmrnState:
    """Iterate, regularisation, and ``(backward_evals, cost)`` history of accepted points."""

    W: np.ndarray
    mu: float = 0.0
    cost: float = float("nan")
    grad: np.ndarray | None = None
    backward_evals: int = 0
    history: list[tuple[int, float]] = field(default_factory=list)
    iterations: int = 0
    accepted: int = 0
    cr_iterations: list[int] = field(default_factory=list)
    descent: list[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""


def count_backward_evals(state: LmrnState) -> int:
    return state.backward_evals


def lmrn_minimize(
    sys,
    cost,
    t,
    W0,
    h: float,
    N: int,
    grad_tol: float = 1e-8,
    cr_tol: float = 1e-8,
    mode: str = "exact",
    *,
    embed=None,
    param_slice: slice | None = None,
    max_iter: int = 200,
    cr_max_iter: int | None = None,
    mu0: float | None = None,
) -> LmrnState:
    """Minimise the discrete cost over the parameters ``W``.

    ``embed`` maps parameters to the initial state (identity by default) and
    ``param_slice`` selects the parameter block of the state for gradients and
    Hessian products.  Each outer iteration solves ``(H + mu I) nu = -grad``
    by CR; steps whose actual reduction is at least 0.1 of the quadratic
    model's prediction are accepted and shrink ``mu`` by 4, others grow it.
    Stops when ``||grad||_inf <= grad_tol``.
    """
    embed = embed or (lambda w: np.asarray(w, dtype=np.float64))
    W = np.array(W0, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise ValueError("initial parameters must be finite")
    state = LmrnState(W=W)
    cr_max_iter = 10 * W.size if cr_max_iter is None else cr_max_iter

    def build(Wp):
        return HvpOperator(sys, cost, t, embed(Wp), h, N, mode, param_slice=param_slice)

    op = build(W)
    g = op.gradient
    C = op.cost_value()
    counted = op.backward_evals
    state.backward_evals = counted
    state.cost, state.grad = C, g
    state.mu = mu = mu0 if mu0 is not None else 1e-3 * max(1.0, float(np.max(np.abs(g))))
    state.history.append((state.backward_evals, C))

    while state.iterations < max_iter:
        if np.max(np.abs(g)) <= grad_tol:
            state.converged = True
            state.message = "gradient tolerance reached"
            break
        state.iterations += 1
        cr = conjugate_residual(ShiftedOperator(op, mu), -g, cr_tol, cr_max_iter)
        state.backward_evals += op.backward_evals - counted
        counted = op.backward_evals
        state.cr_iterations.append(cr.iterations)
        nu = cr.solution
        gnu = float(g @ nu)
        if not cr.converged and cr.iterations == 0 or gnu >= 0.0:
            mu *= MU_GROW
            state.mu = mu
            if mu > MU_MAX:
                state.message = "regularisation escalation cap reached"
                break
            continue
        # (H + mu) nu ~= -g gives the model decrease without another product
        pred = -0.5 * gnu + 0.5 * mu * float(nu @ nu)
        W_trial = W + nu
        C_trial = cost.total(integrate(sys, t, embed(W_trial), h, N))
        actual = C - C_trial
        if pred > 0 and actual >= ACCEPT_RATIO * pred:
            W, C = W_trial, C_trial
            mu *= MU_SHRINK
            op = build(W)
            g = op.gradient
            counted = 0
            state.backward_evals += op.backward_evals
            counted = op.backward_evals
            state.accepted += 1
            state.descent.append(gnu)
            state.history.append((state.backward_evals, C))
            log.debug("LMRN accept %d: C=%.6e mu=%.2e cr=%d", state.accepted, C, mu, cr.iterations)
        else:
            mu *= MU_GROW
            if mu > MU_MAX:
                state.message = "regularisation escalation cap reached"
                break
        state.mu = mu
        state.W, state.cost, state.grad = W, C, g
    else:
        state.message = f"iteration cap {max_iter} reached"
    state.W, state.cost, state.grad, state.mu = W, C, g, mu
    return state
