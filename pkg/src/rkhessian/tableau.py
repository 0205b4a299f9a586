"""Runge-Kutta coefficient sets and their symplectic adjoint partners."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ButcherTableau",
    "AdjointTableau",
    "PartnerUndefinedError",
    "PRESETS",
    "make_tableau",
    "adjoint_partner",
    "verify_partner",
]


class PartnerUndefinedError(ValueError):
    """Raised when a tableau has a zero weight and no partner can be formed."""


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients ``a`` (s x s) and weights ``b`` (s,) of a Runge-Kutta method.

    ``kind`` is ``"explicit"`` (strictly lower triangular ``a``) or
    ``"implicit-euler"``; no other implicit schemes are supported.
    """

    a: np.ndarray
    b: np.ndarray
    kind: str = "explicit"
    name: str = "custom"

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64).ravel()
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.size:
            raise ValueError(f"inconsistent tableau shapes a={a.shape}, b={b.shape}")
        if self.kind == "explicit":
            if np.any(np.triu(a) != 0.0):
                raise ValueError("explicit tableau must be strictly lower triangular")
        elif self.kind == "implicit-euler":
            if a.shape != (1, 1) or a[0, 0] != 1.0 or b[0] != 1.0:
                raise ValueError("implicit-euler tableau must be a=[[1]], b=[1]")
        else:
            raise ValueError(f"unsupported tableau kind {self.kind!r}")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def s(self) -> int:
        return self.b.size

    @property
    def explicit(self) -> bool:
        return self.kind == "explicit"

    def __repr__(self):
        return f"ButcherTableau(name={self.name!r}, s={self.s}, kind={self.kind!r})"


@dataclass(frozen=True, eq=False)
class AdjointTableau:
    """Partner coefficients for the backward sweep.

    ``D[i, j] = B[j] - A[i, j]`` are the coefficients of the backward form,
    in which stage ``i`` is built from ``phi_{n+1}`` plus ``h * sum_j D[i, j] qbar_j``.
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray = field(repr=False)
    source: ButcherTableau = field(repr=False)

    @property
    def s(self) -> int:
        return self.B.size


def _explicit(name, a, b):
    return ButcherTableau(np.array(a, float), np.array(b, float), "explicit", name)


PRESETS = {
    "explicit-euler": lambda: _explicit("explicit-euler", [[0.0]], [1.0]),
    "implicit-euler": lambda: ButcherTableau(
        np.array([[1.0]]), np.array([1.0]), "implicit-euler", "implicit-euler"
    ),
    "heun": lambda: _explicit("heun", [[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5]),
    "rk4": lambda: _explicit(
        "rk4",
        [
            [0.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
    ),
}


def make_tableau(name: str) -> ButcherTableau:
    """Return one of the preset tableaus by name."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(
            f"unknown tableau preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


def adjoint_partner(t: ButcherTableau) -> AdjointTableau:
    """Build the partner tableau ``A_ij = b_j - (b_j / b_i) a_ji``, ``B = b``."""
    b = t.b
    if np.any(b == 0.0):
        raise PartnerUndefinedError(
            f"tableau {t.name!r} has a zero weight; partner coefficients undefined"
        )
    ratio = b[None, :] / b[:, None]  # ratio[i, j] = b_j / b_i
    D = ratio * t.a.T
    A = b[None, :] - D
    B = b.copy()
    for arr in (A, B, D):
        arr.flags.writeable = False
    return AdjointTableau(A=A, B=B, D=D, source=t)


def partner_residual(t: ButcherTableau, at: AdjointTableau) -> float:
    """Max absolute residual of ``B = b`` and ``b_i A_ij + B_j a_ji = b_i B_j``."""
    b, a, A, B = t.b, t.a, at.A, at.B
    r_weights = np.max(np.abs(B - b))
    r_pair = np.max(np.abs(b[:, None] * A + B[None, :] * a.T - b[:, None] * B[None, :]))
    return float(max(r_weights, r_pair))


def verify_partner(t: ButcherTableau, at: AdjointTableau, tol: float = 1e-15) -> bool:
    if t.s != at.s:
        return False
    return partner_residual(t, at) <= tol
