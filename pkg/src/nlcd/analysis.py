"""Measurements on solution stores and randomized audits of functional inequalities."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import stats

from .grid import Field, Grid, OutOfRangeError, field_at_time, lp_norm, mass, rescale, tail_mass
from .kernel import Bump, DiscreteKernel, KernelSpec, discretize, fourier_constants


@dataclass(frozen=True)
class DecayFit:
    p: float
    t_window: tuple
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    @property
    def expected_slope(self) -> float:
        return -0.5 * (1.0 - 1.0 / self.p) if np.isfinite(self.p) else -0.5


@dataclass
class IneqReport:
    lemma_id: str
    trials: int = 0
    worst_margin: float = np.inf
    violations: int = 0
    seed: int | None = None
    # worst margin divided by the scale of the right side
    worst_rel_margin: float = np.inf

    def add(self, lhs: float, rhs: float, rel_slack: float = 1e-12):
        margin = rhs - lhs
        scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
        self.trials += 1
        self.worst_margin = min(self.worst_margin, margin)
        self.worst_rel_margin = min(self.worst_rel_margin, margin / scale)
        if margin < -rel_slack * scale:
            self.violations += 1
        return self

    def merge(self, other: "IneqReport") -> "IneqReport":
        self.trials += other.trials
        self.worst_margin = min(self.worst_margin, other.worst_margin)
        self.worst_rel_margin = min(self.worst_rel_margin, other.worst_rel_margin)
        self.violations += other.violations
        return self

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.violations == 0


# ---------------------------------------------------------------- decay


def decay_exponent(store, p: float, window=(50.0, 500.0)) -> DecayFit:
    """Least-squares slope of ``log |u(t)|_p`` against ``log t`` over the window."""
    t_lo, t_hi = map(float, window)
    if t_lo < 1 or t_hi <= t_lo:
        raise ValueError("decay window must satisfy 1 <= t_lo < t_hi")
    ts = np.asarray(store.times, dtype=float)
    sel = np.flatnonzero((ts >= t_lo * (1 - 1e-12)) & (ts <= t_hi * (1 + 1e-12)))
    if sel.size < 8:
        raise ValueError(f"need >= 8 snapshots in [{t_lo:g}, {t_hi:g}], found {sel.size}")
    norms = np.array([lp_norm(store.snapshots[i], p) for i in sel])
    if np.any(norms <= 0):
        raise ValueError("degenerate decay fit: zero norm in window")
    res = stats.linregress(np.log(ts[sel]), np.log(norms))
    return DecayFit(p, (t_lo, t_hi), float(res.slope), float(res.intercept),
                    float(res.rvalue ** 2), int(sel.size))


def fourier_splitting_bound(store, phi_norms=None) -> float:
    """Smallest C with ``|u(t)|_2 <= C (|phi|_2 (t+1)^-1/2 + |phi|_1 (t+1)^-1/4)``."""
    phi = store.snapshots[0]
    l1, l2 = phi_norms if phi_norms is not None else (lp_norm(phi, 1), lp_norm(phi, 2))
    C = 0.0
    for t, f in zip(store.times, store.snapshots):
        lhs = lp_norm(f, 2)
        if lhs == 0:
            continue
        C = max(C, lhs / (l2 * (t + 1) ** -0.5 + l1 * (t + 1) ** -0.25))
    return C


# ---------------------------------------------------------------- profiles


def _check_profile_mass(store, profile):
    m0 = mass(store.snapshots[0])
    if abs(profile.M - m0) > 1e-8 * max(1.0, abs(m0)):
        raise ValueError(f"profile mass {profile.M:.12g} differs from initial mass {m0:.12g}")


def renormalized_distance(store, profile, p: float, t: float) -> float:
    """``t^{(1-1/p)/2} |u(t) - u_M(t)|_p``; tends to zero as t grows."""
    _check_profile_mass(store, profile)
    u = field_at_time(store, t)
    diff = u.with_values(u.values - profile(t, u.grid.x), nonneg=False)
    return t ** (0.5 * (1.0 - 1.0 / p)) * lp_norm(diff, p)


def default_target(store, lam: float, half_width: float = 10.0, n: int = 2000) -> Grid:
    hw = min(half_width, store.grid.half_width / lam)
    return Grid.symmetric(hw, n)


def rescaled_l1_distance(store, lam: float, profile, target: Grid | None = None) -> float:
    """``|u_lam(1) - u_M(1)|_1`` with ``u_lam(t, x) = lam u(lam^2 t, lam x)``."""
    _check_profile_mass(store, profile)
    if target is None:
        target = default_target(store, lam)
    g = rescale(store, lam, 1.0, target)
    return lp_norm(g.with_values(g.values - profile(1.0, target.x), nonneg=False), 1)


# ---------------------------------------------------------------- quadratic forms


def pair_sum(values: np.ndarray, weights: np.ndarray, dx: float) -> float:
    """``sum_i sum_j w_j (v_i - v_{i-j})^2 dx^2`` over all of Z (v zero-extended)."""
    m = (weights.size - 1) // 2
    ext = np.concatenate((np.zeros(m), values, np.zeros(m)))
    total = 0.0
    for j in range(1, m + 1):
        wj = weights[m + j]
        if wj == 0.0:
            continue
        # padding >= j, so every pair touching the support is inside ext
        d = ext[j:] - ext[:-j]
        total += wj * np.dot(d, d)
    return 2.0 * total * dx * dx


def _kernel_at(rho, dx: float, lam: float) -> DiscreteKernel:
    if isinstance(rho, DiscreteKernel):
        if abs(rho.dx - dx) > 1e-12 * dx:
            raise ValueError("kernel spacing does not match field spacing")
        return rho.rescaled(lam)
    return _discretize_cached(rho, float(dx), float(lam))


@lru_cache(maxsize=256)
def _discretize_cached(spec: KernelSpec, dx: float, lam: float) -> DiscreteKernel:
    return discretize(spec.scaled(lam), dx)


def quadratic_form(f: Field, k, lam: float = 1.0) -> float:
    """``lam^2 int int J_lam(x-y) (f(x) - f(y))^2`` with ``J_lam = lam J(lam .)``."""
    kk = _kernel_at(k, f.grid.dx, lam)
    return lam * lam * pair_sum(f.values, kk.weights, f.grid.dx)


def _moment2(kk: DiscreteKernel) -> float:
    """Discrete ``int z^2 J``."""
    return float(np.sum(kk.weights * kk.offsets ** 2) * kk.dx)


def _forward_grad_sq(v: np.ndarray, dx: float) -> float:
    ext = np.concatenate(([0.0], v, [0.0]))
    d = np.diff(ext) / dx
    return float(np.dot(d, d) * dx)


def h_minus1_sq(f: Field, pad: int = 0) -> float:
    """``sum |u^(xi)|^2 / (1 + xi^2)`` on the zero-padded discrete transform."""
    n = f.grid.n
    N = sfft.next_fast_len(max(2 * n, n + 2 * pad))
    U = sfft.fft(f.values, N)
    xi = 2 * np.pi * sfft.fftfreq(N, d=f.grid.dx)
    return float(np.sum(np.abs(U) ** 2 / (1.0 + xi * xi)) * f.grid.dx / N)


def check_est_ariba(phi: Field, rho, lam: float) -> IneqReport:
    """Nonlocal form versus gradient energy.

    ``lam^3 int int rho(lam(x-y)) (phi(x)-phi(y))^2 <= int rho z^2 * |phi_x|_2^2``,
    with forward differences for ``phi_x`` and the discrete moment of the
    rescaled kernel, so the discrete statement is exact.
    """
    kk = _kernel_at(rho, phi.grid.dx, lam)
    lhs = lam * lam * pair_sum(phi.values, kk.weights, phi.grid.dx)
    rhs = lam * lam * _moment2(kk) * _forward_grad_sq(phi.values, phi.grid.dx)
    return IneqReport("gradient").add(lhs, rhs)


@lru_cache(maxsize=64)
def _splitting_delta(spec: KernelSpec) -> float:
    return fourier_constants(spec)[2]


def balance_threshold(rho_spec: KernelSpec, epsilon: float) -> int:
    return int(np.ceil((_splitting_delta(rho_spec) * epsilon) ** -0.5))


def check_balance(u: Field, rho_spec: KernelSpec, epsilon: float, n: int) -> IneqReport:
    """``|u|^2 <= eps n^2 int int rho_n (u(x)-u(y))^2 + (2/eps) |u|_{H^-1}^2``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n0 = balance_threshold(rho_spec, epsilon)
    if n < n0:
        raise ValueError(f"n={n} below the threshold {n0} for epsilon={epsilon}")
    kk = _kernel_at(rho_spec, u.grid.dx, float(n))
    lhs = lp_norm(u, 2) ** 2
    q = n * n * pair_sum(u.values, kk.weights, u.grid.dx)
    rhs = epsilon * q + (2.0 / epsilon) * h_minus1_sq(u, kk.m)
    return IneqReport("balance").add(lhs, rhs)


def check_local_sup(u: Field, chi: Field, rho_spec: KernelSpec, n: int) -> IneqReport:
    """Cutoff commutator bound for the nonlocal form.

    ``n^2 Q_n(chi u) <= 2|chi|_inf^2 n^2 Q_n(u) + 2|chi|_{W1,inf}^2 int rho z^2 |u|_2^2``
    where ``Q_n(v) = int int rho_n(x-y)(v(x)-v(y))^2``.
    """
    if not chi.grid.same_as(u.grid):
        raise ValueError("cutoff and field live on different grids")
    dx = u.grid.dx
    kk = _kernel_at(rho_spec, dx, float(n))
    lhs = n * n * pair_sum(chi.values * u.values, kk.weights, dx)
    sup = float(np.max(np.abs(chi.values)))
    lip = float(np.max(np.abs(np.diff(chi.values)), initial=0.0)) / dx
    w1inf = max(sup, lip)
    rhs = (2 * sup ** 2 * n * n * pair_sum(u.values, kk.weights, dx)
           + 2 * w1inf ** 2 * n * n * _moment2(kk) * lp_norm(u, 2) ** 2)
    return IneqReport("local_sup").add(lhs, rhs)


# ---------------------------------------------------------------- tails


@dataclass(frozen=True)
class TailFit:
    C: float
    per_R: dict = field(default_factory=dict)

    @property
    def spread(self) -> float:
        """max/min of the per-radius constants (inf if one of them is 0)."""
        vals = list(self.per_R.values())
        lo = min(vals)
        return np.inf if lo <= 0 else max(vals) / lo


def tail_bound_check(store, phi: Field, R_list, t_list, lam_list) -> TailFit:
    """Smallest C with ``int_{|x|>2R} u_lam(t) <= int_{|x|>R} phi + C (t/R^2 + sqrt(t)/R)``.

    The left side is ``int_{|y| > 2 lam R} u(lam^2 t, y) dy``, read directly off
    the unscaled solution.
    """
    per_R = {}
    for R in R_list:
        base = tail_mass(phi, R)
        C = 0.0
        for lam in lam_list:
            if lam < 1:
                raise ValueError("tail bound is stated for lam >= 1")
            for t in t_list:
                if 2 * lam * R >= store.grid.half_width:
                    raise OutOfRangeError(f"2*lam*R = {2 * lam * R:g} leaves the domain")
                lhs = tail_mass(field_at_time(store, lam * lam * t), 2 * lam * R)
                C = max(C, (lhs - base) / (t / R ** 2 + np.sqrt(t) / R))
        per_R[float(R)] = C
    return TailFit(max(per_R.values()), per_R)


# ---------------------------------------------------------------- randomized audits


def random_smooth_field(rng: np.random.Generator, grid: Grid, k_max: float = 3.0,
                        width: float | None = None) -> Field:
    """Band-limited random field under a Gaussian envelope."""
    width = width if width is not None else grid.half_width / 4
    x = grid.x
    n_modes = int(rng.integers(1, 8))
    freqs = rng.uniform(0, k_max, n_modes)
    amps = rng.normal(size=n_modes)
    phases = rng.uniform(0, 2 * np.pi, n_modes)
    center = rng.uniform(-0.3, 0.3) * grid.half_width
    env = np.exp(-0.5 * ((x - center) / (width * rng.uniform(0.3, 1.0))) ** 2)
    vals = env * (np.cos(np.outer(x, freqs) + phases) @ amps)
    return Field(grid, vals * rng.uniform(0.1, 10))


def random_cutoff(rng: np.random.Generator, grid: Grid) -> Field:
    """Smooth bump ``chi`` with random center, width and height."""
    x = grid.x
    c = rng.uniform(-0.3, 0.3) * grid.half_width
    w = rng.uniform(0.5, 0.4 * grid.half_width)
    h = rng.uniform(0.2, 3.0)
    s = (x - c) / w
    inside = np.abs(s) < 1
    vals = np.zeros_like(x)
    vals[inside] = h * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return Field(grid, vals)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NLCD_THREADS", "1")))
    except ValueError:
        return 1


def _run_trials(trial, n_trials: int, seed: int, lemma_id: str) -> IneqReport:
    children = np.random.SeedSequence(seed).spawn(n_trials)
    rngs = [np.random.default_rng(s) for s in children]
    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        reports = list(ex.map(lambda i: trial(rngs[i], i), range(n_trials)))
    out = IneqReport(lemma_id, seed=seed)
    for r in reports:
        out.merge(r)
    return out


AUDIT_GRID = Grid.symmetric(16.0, 1024)


def audit_est_ariba(n_trials: int = 1000, seed: int = 0, rho: KernelSpec = Bump(),
                    lams=(0.5, 1.0, 2.0, 8.0), grid: Grid = AUDIT_GRID) -> IneqReport:
    def trial(rng, i):
        phi = random_smooth_field(rng, grid, k_max=rng.uniform(0.5, 6.0))
        return check_est_ariba(phi, rho, lams[i % len(lams)])
    return _run_trials(trial, n_trials, seed, "gradient")


def audit_balance(n_trials: int = 1000, seed: int = 0, rho: KernelSpec = Bump(),
                  epsilons=(0.1, 0.5, 0.9), multiples=(1, 4),
                  grid: Grid = AUDIT_GRID) -> IneqReport:
    def trial(rng, i):
        eps = epsilons[i % len(epsilons)]
        mult = multiples[(i // len(epsilons)) % len(multiples)]
        n = mult * balance_threshold(rho, eps)
        u = random_smooth_field(rng, grid, k_max=rng.uniform(0.1, 20.0))
        return check_balance(u, rho, eps, n)
    return _run_trials(trial, n_trials, seed, "balance")


def audit_local_sup(n_trials: int = 1000, seed: int = 0, rho: KernelSpec = Bump(),
                    ns=(1, 2, 4, 8), grid: Grid = AUDIT_GRID) -> IneqReport:
    def trial(rng, i):
        u = random_smooth_field(rng, grid, k_max=rng.uniform(0.1, 10.0))
        chi = random_cutoff(rng, grid)
        return check_local_sup(u, chi, rho, ns[i % len(ns)])
    return _run_trials(trial, n_trials, seed, "local_sup")
