"""Self-similar limit profiles with point-mass initial data ``M delta_0``.

* heat:    ``w_t = A w_xx``
* Burgers: ``w_t + c (w^2)_x = A w_xx`` (``c = 1`` by default)

Burgers profile via Hopf-Cole: with ``r = c M / A`` and ``s = sqrt(4 A t)``,

    w(t, x) = (A / c) (1 - e^{-r}) exp(-x^2/s^2) / (s sqrt(pi))
              / ( erfc(x/s)/2 + e^{-r} erfc(-x/s)/2 ).

It has mass M, is self-similar, ``w(t, x) = t^{-1/2} F(x / sqrt(t))``, and
reduces to the heat kernel as ``M -> 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .grid import Grid

_SQRT_PI = np.sqrt(np.pi)


def _check_t(t):
    if np.any(np.asarray(t) <= 0):
        raise ValueError("profiles are defined for t > 0 only")


@dataclass(frozen=True)
class HeatProfile:
    M: float
    A: float

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("diffusivity A must be positive")

    kind = "heat"

    def __call__(self, t, x):
        return heat_eval(self, t, x)


@dataclass(frozen=True)
class BurgersProfile:
    M: float
    A: float
    c: float = 1.0

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("diffusivity A must be positive")
        if not self.M >= 0:
            raise ValueError("Burgers profile needs M >= 0")
        if not self.c > 0:
            raise ValueError("flux coefficient must be positive")

    kind = "burgers"

    def __call__(self, t, x):
        return burgers_eval(self, t, x)


def heat_eval(p: HeatProfile, t, x):
    _check_t(t)
    x = np.asarray(x, dtype=float)
    fourAt = 4.0 * p.A * np.asarray(t, dtype=float)
    return p.M * np.exp(-x * x / fourAt) / np.sqrt(np.pi * fourAt)


def burgers_eval(p: BurgersProfile, t, x):
    _check_t(t)
    x = np.asarray(x, dtype=float)
    s = np.sqrt(4.0 * p.A * np.asarray(t, dtype=float))
    z = x / s
    r = p.c * p.M / p.A
    if r == 0.0:
        return np.zeros(np.broadcast(x, s).shape)
    scale = (p.A / p.c) * (-np.expm1(-r)) / (s * _SQRT_PI)
    zp = np.maximum(z, 0.0)
    zn = np.minimum(z, 0.0)
    # z >= 0: divide through by exp(-z^2) and use erfcx to avoid underflow
    with np.errstate(over="ignore"):
        right = scale / (0.5 * special.erfcx(zp) + np.exp(zp * zp - r) * 0.5 * special.erfc(-zp))
    left = scale * np.exp(-zn * zn) / (0.5 * special.erfc(zn) + np.exp(-r) * 0.5 * special.erfc(-zn))
    return np.where(z >= 0, right, left)


def make_profile(kind: str, M: float, A: float):
    if kind == "heat":
        return HeatProfile(M, A)
    if kind == "burgers":
        return BurgersProfile(M, A)
    raise ValueError(f"unknown profile kind {kind!r}")


def profile_residual(kind: str, M: float, A: float, t: float, grid: Grid, h: float) -> float:
    """Sup over ``grid`` of the centered-difference PDE residual with step ``h``."""
    _check_t(t)
    if not 0 < h < t:
        raise ValueError("need 0 < h < t")
    w = make_profile(kind, M, A)
    x = grid.x
    w0 = w(t, x)
    wt = (w(t + h, x) - w(t - h, x)) / (2 * h)
    wxx = (w(t, x + h) - 2 * w0 + w(t, x - h)) / h ** 2
    res = wt - A * wxx
    if kind == "burgers":
        res = res + w.c * (w(t, x + h) ** 2 - w(t, x - h) ** 2) / (2 * h)
    return float(np.max(np.abs(res)))


def self_similarity_check(kind: str, M: float, A: float, t: float, lam: float,
                          grid: Grid | None = None) -> float:
    """``sup_x |lam w(lam^2 t, lam x) - w(t, x)|`` over ``grid``."""
    _check_t(t)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if grid is None:
        grid = Grid.symmetric(12.0 * np.sqrt(A * t), 2001)
    w = make_profile(kind, M, A)
    x = grid.x
    return float(np.max(np.abs(lam * w(lam * lam * t, lam * x) - w(t, x))))
