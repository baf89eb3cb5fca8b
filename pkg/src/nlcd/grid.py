"""Uniform 1-D grids and cell-averaged fields.

The real line is truncated to ``[x_min, x_min + n*dx]`` and every field is
understood to vanish outside that interval (zero extension).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class OutOfRangeError(ValueError):
    """Raised when a requested time or radius lies outside the simulated range."""


@dataclass(frozen=True)
class Grid:
    x_min: float
    dx: float
    n: int

    def __post_init__(self):
        if not (self.dx > 0 and np.isfinite(self.dx)):
            raise ValueError(f"grid spacing must be positive, got {self.dx}")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs at least 8 cells, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "dx", float(self.dx))

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Grid":
        """Grid on ``[-half_width, half_width]`` with ``n`` cells."""
        return cls(-float(half_width), 2.0 * half_width / n, n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.n * self.dx

    @property
    def half_width(self) -> float:
        """Largest ``R`` with ``[-R, R]`` inside the domain."""
        return min(-self.x_min, self.x_max)

    @cached_property
    def x(self) -> np.ndarray:
        centers = self.x_min + (np.arange(self.n) + 0.5) * self.dx
        centers.setflags(write=False)
        return centers

    def same_as(self, other: "Grid", rtol: float = 1e-12) -> bool:
        return (self.n == other.n
                and abs(self.dx - other.dx) <= rtol * self.dx
                and abs(self.x_min - other.x_min) <= rtol * max(1.0, abs(self.x_min)))

    def sample(self, func, nonneg: bool = False) -> "Field":
        """Field with values ``func(x)`` at the cell centers."""
        return Field(self, np.asarray(func(self.x), dtype=float), nonneg)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n), nonneg=True)


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray = field(repr=False)
    nonneg: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.nonneg and v.size:
            floor = -1e-14 * max(1.0, float(np.max(np.abs(v))))
            if v.min() < floor:
                raise ValueError(f"field flagged nonnegative has min {v.min():.3e}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, nonneg: bool | None = None) -> "Field":
        return Field(self.grid, values, self.nonneg if nonneg is None else nonneg)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c, self.nonneg and c >= 0)

    __rmul__ = __mul__


def lp_norm(f: Field, p: float) -> float:
    """Discrete L^p norm of a cell-averaged field; ``p = inf`` gives the max."""
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    if p == 1:
        return float(a.sum() * f.grid.dx)
    if p == 2:
        return float(np.sqrt(np.dot(a, a) * f.grid.dx))
    # scale first so large p does not overflow
    top = a.max(initial=0.0)
    if top == 0.0:
        return 0.0
    return float(top * (np.sum((a / top) ** p) * f.grid.dx) ** (1.0 / p))


def mass(f: Field) -> float:
    return float(np.sum(f.values) * f.grid.dx)


def interpolate(f: Field, x):
    """Piecewise-linear interpolation between cell centers.

    Inside the two edge half-cells the nearest segment is extended linearly,
    so affine data are reproduced on the whole domain. Zero outside it.
    """
    g = f.grid
    xq = np.asarray(x, dtype=float)
    s = (xq - g.x_min) / g.dx - 0.5
    i = np.clip(np.floor(s).astype(np.int64), 0, g.n - 2)
    w = s - i
    v = f.values
    out = (1.0 - w) * v[i] + w * v[i + 1]
    out = np.where((xq >= g.x_min) & (xq <= g.x_max), out, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def field_at_time(store, t: float) -> Field:
    """Snapshot of ``store`` at time ``t`` by linear interpolation in time."""
    times = np.asarray(store.times, dtype=float)
    if t < times[0] - 1e-12 * max(1.0, abs(times[0])) or t > times[-1] * (1 + 1e-12) + 1e-300:
        raise OutOfRangeError(
            f"time {t:g} outside the simulated range [{times[0]:g}, {times[-1]:g}]")
    j = int(np.searchsorted(times, t))
    if j < len(times) and np.isclose(times[j], t, rtol=1e-13, atol=0.0):
        return store.snapshots[j]
    j = min(max(j, 1), len(times) - 1)
    t0, t1 = times[j - 1], times[j]
    th = (t - t0) / (t1 - t0)
    f0, f1 = store.snapshots[j - 1], store.snapshots[j]
    return f0.with_values((1.0 - th) * f0.values + th * f1.values,
                          nonneg=f0.nonneg and f1.nonneg)


def rescale(store, lam: float, t: float, target: Grid) -> Field:
    """The renormalized field ``x -> lam * u(lam**2 * t, lam * x)`` on ``target``."""
    if not lam > 0 or not t > 0:
        raise ValueError("rescale needs lam > 0 and t > 0")
    u = field_at_time(store, lam * lam * t)
    vals = lam * interpolate(u, lam * target.x)
    return Field(target, vals, nonneg=u.nonneg)


def tail_mass(f: Field, R: float) -> float:
    """Mass of ``|f|`` carried by cells with ``|x_i| > R``."""
    if not R > 0:
        raise ValueError("tail radius must be positive")
    if R >= f.grid.half_width:
        raise OutOfRangeError(f"radius {R:g} reaches the domain edge {f.grid.half_width:g}")
    a = np.abs(f.values[np.abs(f.grid.x) > R])
    return float(a.sum() * f.grid.dx)


def total_variation(f: Field) -> float:
    v = np.concatenate(([0.0], f.values, [0.0]))
    return float(np.abs(np.diff(v)).sum())


def write_field_csv(path, f: Field) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("x,u\n")
        for xi, ui in zip(f.grid.x, f.values):
            fh.write(f"{xi:.17g},{ui:.17g}\n")


def read_field_csv(path, nonneg: bool = False) -> Field:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "u"}:
        raise ValueError(f"{path}: expected header 'x,u'")
    x = np.array([float(r["x"]) for r in rows])
    u = np.array([float(r["u"]) for r in rows])
    dx = (x[-1] - x[0]) / (len(x) - 1)
    if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0.0):
        raise ValueError(f"{path}: cell centers are not uniformly spaced")
    return Field(Grid(x[0] - 0.5 * dx, dx, len(x)), u, nonneg)
