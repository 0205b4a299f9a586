"""Matrix-free conjugate residual / conjugate gradient and dense diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KrylovResult",
    "conjugate_residual",
    "conjugate_gradient",
    "degree_of_asymmetry",
    "cond_inf",
    "perturbation_bound",
]

log = logging.getLogger(__name__)

_BREAKDOWN = 1e-300


@dataclass
class KrylovResult:
    """Solution and per-iteration histories.

    ``residual_history[k]`` is ``||r_k||_inf / ||r_0||_inf`` with entry 0 for
    the zero initial guess; ``error_history`` is filled only when a reference
    solution was supplied.  ``applies`` counts operator applications.
    """

    solution: np.ndarray
    iterations: int
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    error_history: list[float] | None = None
    residual2_history: list[float] = field(default_factory=list)
    applies: int = 0
    message: str = ""


def _as_apply(op):
    if callable(getattr(op, "apply", None)):
        return op.apply
    if callable(op):
        return op
    M = np.asarray(op, dtype=np.float64)
    return lambda v: M @ v


def _start(op, r, v_ref):
    apply = _as_apply(op)
    b = np.array(r, dtype=np.float64).ravel()
    if not np.all(np.isfinite(b)):
        raise FloatingPointError("right-hand side is not finite")
    bnorm = np.max(np.abs(b)) if b.size else 0.0
    res = KrylovResult(np.zeros_like(b), 0, False)
    res.residual_history.append(1.0 if bnorm > 0 else 0.0)
    res.residual2_history.append(float(np.linalg.norm(b)))
    if v_ref is not None:
        v_ref = np.asarray(v_ref, dtype=np.float64)
        res.error_history = [float(np.max(np.abs(v_ref)))]
    return apply, b, bnorm, res, v_ref


def _record(res, x, r, bnorm, v_ref):
    rel = float(np.max(np.abs(r)) / bnorm)
    res.residual_history.append(rel)
    res.residual2_history.append(float(np.linalg.norm(r)))
    if v_ref is not None:
        res.error_history.append(float(np.max(np.abs(x - v_ref))))
    if not np.isfinite(rel):
        raise FloatingPointError(f"non-finite residual at CR iteration {res.iterations}")
    return rel


def conjugate_residual(op, r, tol: float = 1e-8, max_iter: int | None = None, v_ref=None):
    """Solve ``op v = r`` from ``v = 0`` with the conjugate residual method.

    Stops when ``||r_k||_inf / ||r||_inf <= tol``.  ``op`` may be an object
    with ``apply``, a callable, or a dense matrix.  A vanishing denominator
    ends the iteration with ``converged=False``.
    """
    apply, b, bnorm, res, v_ref = _start(op, r, v_ref)
    n = b.size
    max_iter = 10 * n if max_iter is None else max_iter
    if bnorm == 0.0:
        res.converged = True
        return res
    x = res.solution
    rk = b.copy()
    p = rk.copy()
    Ar = apply(rk)
    res.applies += 1
    Ap = Ar.copy()
    rAr = rk @ Ar
    while res.iterations < max_iter:
        ApAp = Ap @ Ap
        if abs(ApAp) < _BREAKDOWN or abs(rAr) < _BREAKDOWN:
            res.message = f"breakdown at iteration {res.iterations} (rAr={rAr:.3e}, ApAp={ApAp:.3e})"
            log.warning("CR %s", res.message)
            return res
        alpha = rAr / ApAp
        x += alpha * p
        rk -= alpha * Ap
        res.iterations += 1
        if _record(res, x, rk, bnorm, v_ref) <= tol:
            res.converged = True
            return res
        if res.iterations >= max_iter:
            break
        Ar = apply(rk)
        res.applies += 1
        rAr_new = rk @ Ar
        beta = rAr_new / rAr
        rAr = rAr_new
        p = rk + beta * p
        Ap = Ar + beta * Ap
    res.message = f"no convergence in {max_iter} iterations"
    return res


def conjugate_gradient(op, r, tol: float = 1e-8, max_iter: int | None = None, v_ref=None):
    """Plain CG with the same interface and stopping rule as :func:`conjugate_residual`."""
    apply, b, bnorm, res, v_ref = _start(op, r, v_ref)
    max_iter = 10 * b.size if max_iter is None else max_iter
    if bnorm == 0.0:
        res.converged = True
        return res
    x = res.solution
    rk = b.copy()
    p = rk.copy()
    rr = rk @ rk
    while res.iterations < max_iter:
        Ap = apply(p)
        res.applies += 1
        pAp = p @ Ap
        if abs(pAp) < _BREAKDOWN:
            res.message = f"breakdown at iteration {res.iterations}"
            return res
        alpha = rr / pAp
        x += alpha * p
        rk -= alpha * Ap
        res.iterations += 1
        if _record(res, x, rk, bnorm, v_ref) <= tol:
            res.converged = True
            return res
        rr_new = rk @ rk
        p = rk + (rr_new / rr) * p
        rr = rr_new
    res.message = f"no convergence in {max_iter} iterations"
    return res


def degree_of_asymmetry(M) -> float:
    """``max |M - M.T|``."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    return float(np.max(np.abs(M - M.T))) if M.size else 0.0


def cond_inf(M) -> float:
    """Condition number in the operator norm induced by the max norm."""
    M = np.asarray(M, dtype=np.float64)
    inv = np.linalg.inv(M)  # raises LinAlgError when singular
    return float(np.linalg.norm(M, np.inf) * np.linalg.norm(inv, np.inf))


def perturbation_bound(H, H_approx) -> float:
    """``cond_inf(H~) * ||H - H~||_inf / ||H~||_inf``."""
    H = np.asarray(H, dtype=np.float64)
    Ht = np.asarray(H_approx, dtype=np.float64)
    return cond_inf(Ht) * np.linalg.norm(H - Ht, np.inf) / np.linalg.norm(Ht, np.inf)
