"""Convolution kernels J: continuous families, discretization, and J*u.

Every kernel is even, nonnegative and has unit mass. The Fourier transform
convention is ``J^(xi) = int J(z) exp(-i xi z) dz`` so that ``J^(0) = 1`` and
``J^(xi) = 1 - A xi^2 + O(xi^4)`` with ``A = 1/2 int z^2 J``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import integrate, special

from .grid import Field


class KernelSpec:
    """Base class for continuous kernels."""

    #: half-width of the support, ``None`` for unbounded support
    support = None

    def density(self, z):
        raise NotImplementedError

    def fourier(self, xi):
        raise NotImplementedError

    def second_moment(self) -> float:
        """``A = 1/2 int z^2 J(z) dz``."""
        raise NotImplementedError

    def tail_mass(self, L: float) -> float:
        """``int_{|z| > L} J``."""
        raise NotImplementedError

    def scaled(self, lam: float) -> "KernelSpec":
        """The kernel ``lam * J(lam * z)``."""
        if lam == 1:
            return self
        return Scaled(self, float(lam))


@dataclass(frozen=True)
class Exponential(KernelSpec):
    """``J(z) = exp(-|z|) / 2``; the kernel of the radiating-gas model."""

    def density(self, z):
        return 0.5 * np.exp(-np.abs(z))

    def fourier(self, xi):
        return 1.0 / (1.0 + np.square(xi))

    def second_moment(self):
        return 1.0

    def tail_mass(self, L):
        return float(np.exp(-L))


@dataclass(frozen=True)
class Gaussian(KernelSpec):
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Gaussian kernel needs sigma > 0")

    def density(self, z):
        s = self.sigma
        return np.exp(-0.5 * np.square(z / s)) / (s * np.sqrt(2 * np.pi))

    def fourier(self, xi):
        return np.exp(-0.5 * np.square(self.sigma * np.asarray(xi)))

    def second_moment(self):
        return 0.5 * self.sigma ** 2

    def tail_mass(self, L):
        return float(special.erfc(L / (self.sigma * np.sqrt(2.0))))


@dataclass(frozen=True)
class Box(KernelSpec):
    halfwidth: float = 1.0

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("box kernel needs a positive half-width")

    @property
    def support(self):
        return self.halfwidth

    def density(self, z):
        h = self.halfwidth
        return np.where(np.abs(z) <= h, 0.5 / h, 0.0)

    def fourier(self, xi):
        # np.sinc(x) = sin(pi x) / (pi x)
        return np.sinc(self.halfwidth * np.asarray(xi) / np.pi)

    def second_moment(self):
        return self.halfwidth ** 2 / 6.0

    def tail_mass(self, L):
        return max(0.0, 1.0 - L / self.halfwidth)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(400)


@dataclass(frozen=True)
class Bump(KernelSpec):
    """Smooth compactly supported ``C exp(-1 / (1 - (z/h)^2))`` on ``|z| < h``."""

    halfwidth: float = 3.0

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("bump kernel needs a positive half-width")

    @property
    def support(self):
        return self.halfwidth

    @staticmethod
    def _shape(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
        return out

    @cached_property
    def _norm(self):
        # mass of the unit-width shape
        return float(_GL_WEIGHTS @ self._shape(_GL_NODES))

    def density(self, z):
        h = self.halfwidth
        return self._shape(np.asarray(z) / h) / (h * self._norm)

    def fourier(self, xi):
        xi = np.asarray(xi, dtype=float)
        w = _GL_WEIGHTS * self._shape(_GL_NODES) / self._norm
        flat = xi.reshape(-1)
        out = np.empty_like(flat)
        for lo in range(0, flat.size, 4096):
            chunk = flat[lo:lo + 4096]
            out[lo:lo + 4096] = np.cos(np.outer(chunk * self.halfwidth, _GL_NODES)) @ w
        return out.reshape(xi.shape)

    def second_moment(self):
        m2 = _GL_WEIGHTS @ (_GL_NODES ** 2 * self._shape(_GL_NODES)) / self._norm
        return 0.5 * float(m2) * self.halfwidth ** 2

    def tail_mass(self, L):
        h = self.halfwidth
        if L >= h:
            return 0.0
        val, _ = integrate.quad(lambda z: float(self.density(z)), L, h, epsabs=1e-15)
        return 2.0 * val


@dataclass(frozen=True)
class TabulatedEven(KernelSpec):
    """Kernel given by samples ``J(j*dz)``, ``j = 0..m`` (mirrored to negative z).

    Samples are renormalized to unit mass under the rectangle rule and the
    density between samples is linear.
    """

    samples: tuple
    dz: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("tabulated kernel needs at least two samples")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("tabulated kernel samples must be finite and nonnegative")
        if not self.dz > 0:
            raise ValueError("tabulated kernel spacing must be positive")
        total = (2 * s.sum() - s[0]) * self.dz
        if total <= 0:
            raise ValueError("tabulated kernel has zero mass")
        object.__setattr__(self, "samples", tuple(s / total))
        z = np.arange(s.size) * self.dz
        m2 = 2 * np.sum(z ** 2 * s / total) * self.dz
        tail = 2 * np.sum((z ** 2 * s / total)[int(0.9 * s.size):]) * self.dz
        # a finite table always has a finite moment; call it divergent when
        # the outer tenth of the table still carries a visible share of it
        if m2 == 0 or tail > 0.02 * m2:
            raise ValueError("tabulated kernel has a divergent second moment "
                             "(not converged within the table)")

    @property
    def _s(self):
        return np.asarray(self.samples)

    @property
    def _z(self):
        return np.arange(len(self.samples)) * self.dz

    @property
    def support(self):
        return (len(self.samples) - 1) * self.dz

    def density(self, z):
        a = np.abs(np.asarray(z, dtype=float))
        return np.interp(a, self._z, self._s, right=0.0)

    def fourier(self, xi):
        xi = np.asarray(xi, dtype=float)
        c = np.cos(np.multiply.outer(xi, self._z))
        wts = self._s * self.dz * np.where(self._z > 0, 2.0, 1.0)
        return c @ wts

    def second_moment(self):
        return float(np.sum(self._z ** 2 * self._s) * self.dz)

    def tail_mass(self, L):
        z, s = self._z, self._s
        return float(2 * np.sum(s[z > L]) * self.dz)


@dataclass(frozen=True)
class Scaled(KernelSpec):
    """``lam * J(lam * z)`` for a base kernel J."""

    base: KernelSpec
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("kernel scale must be positive")

    @property
    def support(self):
        s = self.base.support
        return None if s is None else s / self.lam

    def density(self, z):
        return self.lam * self.base.density(self.lam * np.asarray(z))

    def fourier(self, xi):
        return self.base.fourier(np.asarray(xi) / self.lam)

    def second_moment(self):
        return self.base.second_moment() / self.lam ** 2

    def tail_mass(self, L):
        return self.base.tail_mass(self.lam * L)

    def scaled(self, lam):
        return Scaled(self.base, self.lam * lam)


def load_tabulated_csv(path) -> TabulatedEven:
    """Read ``z,J`` rows, average ``J(z)`` with ``J(-z)`` and renormalize."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"z", "J"}:
        raise ValueError(f"{path}: expected header 'z,J'")
    z = np.array([float(r["z"]) for r in rows])
    J = np.array([float(r["J"]) for r in rows])
    pos = np.unique(np.abs(z[z != 0]))
    if pos.size == 0:
        raise ValueError(f"{path}: no nonzero offsets")
    dz = pos[0]
    idx = np.rint(np.abs(z) / dz).astype(int)
    if not np.allclose(idx * dz, np.abs(z), rtol=1e-9, atol=1e-12 * dz):
        raise ValueError(f"{path}: offsets are not on a uniform lattice")
    m = idx.max()
    acc = np.zeros(m + 1)
    cnt = np.zeros(m + 1)
    np.add.at(acc, idx, J)
    np.add.at(cnt, idx, 1)
    if np.any(cnt == 0):
        raise ValueError(f"{path}: missing lattice offsets")
    return TabulatedEven(tuple(acc / cnt), float(dz))


def second_moment(spec: KernelSpec) -> float:
    A = spec.second_moment()
    if not np.isfinite(A):
        raise ValueError("kernel has a divergent second moment")
    return float(A)


@dataclass(frozen=True)
class DiscreteKernel:
    """Symmetric weights ``w_j`` at offsets ``j*dx``, ``j = -m..m``, with ``sum(w)*dx = 1``."""

    dx: float
    weights: np.ndarray = field(repr=False)
    second_moment_A: float
    spec: KernelSpec | None = None
    tail_tol: float = 1e-12

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size % 2 != 1:
            raise ValueError("kernel weights must have odd length")
        if np.any(w < 0) or not np.allclose(w, w[::-1], rtol=0, atol=0):
            raise ValueError("kernel weights must be nonnegative and symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return (self.weights.size - 1) // 2

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.m, self.m + 1) * self.dx

    @property
    def discrete_second_moment(self) -> float:
        """``1/2 sum w_j (j dx)^2 dx``; tends to ``second_moment_A`` as dx -> 0."""
        return 0.5 * float(np.sum(self.weights * self.offsets ** 2) * self.dx)

    def symbol(self, xi):
        """Discrete Fourier symbol ``sum_j w_j dx cos(j dx xi)``."""
        xi = np.asarray(xi, dtype=float)
        j = np.arange(1, self.m + 1)
        w = self.weights[self.m + 1:] * self.dx
        return self.weights[self.m] * self.dx + 2 * np.cos(np.multiply.outer(xi, j * self.dx)) @ w

    def rescaled(self, lam: float) -> "DiscreteKernel":
        """Re-discretization of ``lam * J(lam * z)`` on the same spacing."""
        if lam == 1:
            return self
        if self.spec is None:
            raise ValueError("cannot rescale a kernel without its continuous spec")
        return discretize(self.spec.scaled(lam), self.dx, self.tail_tol)


def discretize(spec: KernelSpec, dx: float, tail_tol: float = 1e-12) -> DiscreteKernel:
    """Sample ``spec`` at ``j*dx``, truncate and renormalize to unit discrete mass.

    The truncation radius is the first ``(m + 1/2) dx`` beyond which the
    continuous kernel carries less than ``tail_tol`` of its mass.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    if not 0 < tail_tol <= 1e-3:
        raise ValueError("tail_tol must lie in (0, 1e-3]")
    if spec.support is not None:
        m = max(0, int(np.ceil(spec.support / dx - 0.5)))
        while m > 0 and spec.tail_mass((m - 0.5) * dx) < tail_tol:
            m -= 1
    else:
        m = 0
        step = 1
        while spec.tail_mass((m + 0.5) * dx) >= tail_tol:
            m += step
            step *= 2
        lo, hi = max(0, m - step // 2), m
        while lo < hi:
            mid = (lo + hi) // 2
            if spec.tail_mass((mid + 0.5) * dx) < tail_tol:
                hi = mid
            else:
                lo = mid + 1
        m = lo
    if m == 0:
        raise ValueError(f"kernel is not resolved by spacing dx={dx:g}")
    j = np.arange(-m, m + 1)
    w = np.asarray(spec.density(j * dx), dtype=float)
    w = 0.5 * (w + w[::-1])
    total = w.sum() * dx
    if total <= 0:
        raise ValueError(f"kernel samples vanish at spacing dx={dx:g}")
    w = w / total
    return DiscreteKernel(float(dx), w, second_moment(spec), spec, tail_tol)


def _check_spacing(k: DiscreteKernel, f: Field):
    if abs(k.dx - f.grid.dx) > 1e-12 * f.grid.dx:
        raise ValueError(f"kernel spacing {k.dx:g} does not match grid spacing {f.grid.dx:g}")


def convolve_values(w: np.ndarray, v: np.ndarray, dx: float, path: str = "auto") -> np.ndarray:
    """``(J*v)_i = sum_j w_j v_{i-j} dx`` with zero extension, same length as ``v``."""
    m = (w.size - 1) // 2
    n = v.size
    if path == "auto":
        path = "direct" if m <= 64 else "fft"
    if path == "direct":
        full = np.convolve(v, w)
    elif path == "fft":
        L = sfft.next_fast_len(n + 2 * m, real=True)
        full = sfft.irfft(sfft.rfft(v, L) * sfft.rfft(w, L), L)
    else:
        raise ValueError(f"unknown convolution path {path!r}")
    return full[m:m + n] * dx


def convolve(k: DiscreteKernel, f: Field, path: str = "fft") -> Field:
    _check_spacing(k, f)
    out = convolve_values(k.weights, f.values, k.dx, path)
    if f.nonneg:
        # fft round-off may leave -1e-18 where the exact result is zero
        out = np.maximum(out, 0.0)
    return Field(f.grid, out, f.nonneg)


def fourier_constants(spec: KernelSpec, *, xi_max: float | None = None,
                      n_xi: int = 200_001) -> tuple[float, float, float]:
    """Constants ``(c, R, delta)`` of the frequency splitting.

    ``J^(xi) <= 1 - c xi^2`` for ``|xi| <= R`` and ``J^(xi) <= 1 - delta``
    for ``|xi| >= R``. The search starts from ``c = 0.6 A`` and shrinks ``c``
    until a positive radius exists; R is the last grid frequency before the
    quadratic bound first fails.
    """
    A = second_moment(spec)
    if xi_max is None:
        xi_max = 60.0 / np.sqrt(A)
    xi = np.linspace(0.0, xi_max, n_xi)
    J = np.asarray(spec.fourier(xi), dtype=float)
    one_minus = 1.0 - J
    c = 0.6 * A
    for _ in range(200):
        ok = one_minus[1:] >= c * xi[1:] ** 2
        bad = np.flatnonzero(~ok)
        iR = n_xi - 1 if bad.size == 0 else bad[0]  # index in xi of last valid point
        if iR >= 2:
            break
        c *= 0.9
    else:
        raise ValueError("no quadratic bound found near xi = 0")
    R = float(xi[iR])
    sup_out = float(J[iR:].max())
    delta = 1.0 - sup_out
    tail_sup = float(J[int(0.9 * n_xi):].max())
    if delta <= 1e-12 or tail_sup >= 1.0 - 1e-12:
        raise ValueError("kernel transform does not stay below 1 away from the origin")
    return float(c), R, delta
