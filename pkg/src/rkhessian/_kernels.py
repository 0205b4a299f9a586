"""Stencil kernels for the semi-discrete PDE benchmarks.

Each kernel exists twice: a loop form compiled with numba and a vectorised
numpy form.  Both evaluate the same expressions in the same order so they
agree to a few ulp.  ``ACTIVE`` holds whichever set ``_accel`` selected.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# Allen-Cahn, Neumann boundaries via mirrored ghost points (factor 2 rows)
# --------------------------------------------------------------------------


def _ac_lap_loop(v, out):
    d = v.shape[0]
    out[0] = 2.0 * (v[1] - v[0])
    for m in range(1, d - 1):
        out[m] = v[m + 1] - 2.0 * v[m] + v[m - 1]
    out[d - 1] = 2.0 * (v[d - 2] - v[d - 1])


def _ac_lap_t_loop(w, out):
    d = w.shape[0]
    for j in range(d):
        acc = -2.0 * w[j]
        if j > 0:
            acc += (2.0 if j == 1 else 1.0) * w[j - 1]
        if j < d - 1:
            acc += (2.0 if j == d - 2 else 1.0) * w[j + 1]
        out[j] = acc


def _ac_rhs_loop(psi, alpha, c, kappa):
    d = psi.shape[0]
    out = np.empty(d)
    _ac_lap_loop(psi, out)
    for m in range(d):
        p = psi[m]
        out[m] = alpha * p + kappa * (p * p * p) + c * out[m]
    return out


def _ac_jvp_loop(psi, v, alpha, c, kappa):
    d = psi.shape[0]
    out = np.empty(d)
    _ac_lap_loop(v, out)
    for m in range(d):
        p = psi[m]
        out[m] = (alpha + 3.0 * kappa * (p * p)) * v[m] + c * out[m]
    return out


def _ac_vjp_loop(psi, w, alpha, c, kappa):
    d = psi.shape[0]
    out = np.empty(d)
    _ac_lap_t_loop(w, out)
    for m in range(d):
        p = psi[m]
        out[m] = (alpha + 3.0 * kappa * (p * p)) * w[m] + c * out[m]
    return out


def _ac_lap_np(v):
    out = np.empty_like(v)
    out[0] = 2.0 * (v[1] - v[0])
    out[1:-1] = v[2:] - 2.0 * v[1:-1] + v[:-2]
    out[-1] = 2.0 * (v[-2] - v[-1])
    return out


def _ac_lap_t_np(w):
    d = w.shape[0]
    lo = np.ones(d)  # coefficient on w[j-1]
    hi = np.ones(d)  # coefficient on w[j+1]
    lo[1] = 2.0
    hi[d - 2] = 2.0
    out = -2.0 * w
    out[1:] += lo[1:] * w[:-1]
    out[:-1] += hi[:-1] * w[1:]
    return out


def _ac_rhs_np(psi, alpha, c, kappa):
    return alpha * psi + kappa * (psi * psi * psi) + c * _ac_lap_np(psi)


def _ac_jvp_np(psi, v, alpha, c, kappa):
    return (alpha + 3.0 * kappa * (psi * psi)) * v + c * _ac_lap_np(v)


def _ac_vjp_np(psi, w, alpha, c, kappa):
    return (alpha + 3.0 * kappa * (psi * psi)) * w + c * _ac_lap_t_np(w)


# --------------------------------------------------------------------------
# Periodic staggered wave operator.  flux_m = W_m (U_{m+1} - U_m) and
# div(W, U)_m = (flux_m - flux_{m-1}) / dz^2, indices mod d.
# --------------------------------------------------------------------------


def _wave_div_loop(W, U, inv_dz2, out):
    d = U.shape[0]
    prev = W[d - 1] * (U[0] - U[d - 1])
    for m in range(d):
        nxt = U[m + 1] if m + 1 < d else U[0]
        flux = W[m] * (nxt - U[m])
        out[m] = (flux - prev) * inv_dz2
        prev = flux


def _wave_wgrad_loop(U, lam, inv_dz2, out):
    # transpose of W -> div(W, U), applied to lam: -(G U)(G lam) / dz^2
    d = U.shape[0]
    for m in range(d):
        k = m + 1 if m + 1 < d else 0
        out[m] = -((U[k] - U[m]) * (lam[k] - lam[m])) * inv_dz2


def _wave_rhs_loop(y, inv_dz2):
    d = y.shape[0] // 3
    out = np.zeros(3 * d)
    U = y[:d]
    V = y[d : 2 * d]
    W = y[2 * d :]
    out[:d] = V
    _wave_div_loop(W, U, inv_dz2, out[d : 2 * d])
    return out


def _wave_jvp_loop(y, v, inv_dz2):
    d = y.shape[0] // 3
    out = np.zeros(3 * d)
    U = y[:d]
    W = y[2 * d :]
    tmp = np.empty(d)
    out[:d] = v[d : 2 * d]
    _wave_div_loop(W, v[:d], inv_dz2, out[d : 2 * d])
    _wave_div_loop(v[2 * d :], U, inv_dz2, tmp)
    for m in range(d):
        out[d + m] += tmp[m]
    return out


def _wave_vjp_loop(y, w, inv_dz2):
    d = y.shape[0] // 3
    out = np.empty(3 * d)
    U = y[:d]
    W = y[2 * d :]
    wV = w[d : 2 * d]
    _wave_div_loop(W, wV, inv_dz2, out[:d])
    out[d : 2 * d] = w[:d]
    _wave_wgrad_loop(U, wV, inv_dz2, out[2 * d :])
    return out


def _wave_so_vjp_loop(y, delta, lam, inv_dz2):
    d = y.shape[0] // 3
    out = np.zeros(3 * d)
    lV = lam[d : 2 * d]
    _wave_div_loop(delta[2 * d :], lV, inv_dz2, out[:d])
    _wave_wgrad_loop(delta[:d], lV, inv_dz2, out[2 * d :])
    return out


def _fdiff_np(U):
    return np.roll(U, -1) - U


def _wave_div_np(W, U, inv_dz2):
    flux = W * _fdiff_np(U)
    return (flux - np.roll(flux, 1)) * inv_dz2


def _wave_wgrad_np(U, lam, inv_dz2):
    return -(_fdiff_np(U) * _fdiff_np(lam)) * inv_dz2


def _wave_rhs_np(y, inv_dz2):
    U, V, W = np.split(y, 3)
    return np.concatenate([V, _wave_div_np(W, U, inv_dz2), np.zeros_like(W)])


def _wave_jvp_np(y, v, inv_dz2):
    U, _, W = np.split(y, 3)
    vU, vV, vW = np.split(v, 3)
    dV = _wave_div_np(W, vU, inv_dz2) + _wave_div_np(vW, U, inv_dz2)
    return np.concatenate([vV, dV, np.zeros_like(W)])


def _wave_vjp_np(y, w, inv_dz2):
    U, _, W = np.split(y, 3)
    wU, wV, _ = np.split(w, 3)
    return np.concatenate(
        [_wave_div_np(W, wV, inv_dz2), wU, _wave_wgrad_np(U, wV, inv_dz2)]
    )


def _wave_so_vjp_np(y, delta, lam, inv_dz2):
    dU, _, dW = np.split(delta, 3)
    lV = np.split(lam, 3)[1]
    return np.concatenate(
        [_wave_div_np(dW, lV, inv_dz2), np.zeros_like(dU), _wave_wgrad_np(dU, lV, inv_dz2)]
    )


_ac_lap_loop = njit(_ac_lap_loop)
_ac_lap_t_loop = njit(_ac_lap_t_loop)
_wave_div_loop = njit(_wave_div_loop)
_wave_wgrad_loop = njit(_wave_wgrad_loop)

numba_kernels = SimpleNamespace(
    ac_rhs=njit(_ac_rhs_loop),
    ac_jvp=njit(_ac_jvp_loop),
    ac_vjp=njit(_ac_vjp_loop),
    wave_rhs=njit(_wave_rhs_loop),
    wave_jvp=njit(_wave_jvp_loop),
    wave_vjp=njit(_wave_vjp_loop),
    wave_so_vjp=njit(_wave_so_vjp_loop),
)

numpy_kernels = SimpleNamespace(
    ac_rhs=_ac_rhs_np,
    ac_jvp=_ac_jvp_np,
    ac_vjp=_ac_vjp_np,
    wave_rhs=_wave_rhs_np,
    wave_jvp=_wave_jvp_np,
    wave_vjp=_wave_vjp_np,
    wave_so_vjp=_wave_so_vjp_np,
)

ACTIVE = numba_kernels if USE_NUMBA else numpy_kernels
BACKEND = "numba" if USE_NUMBA else "numpy"
