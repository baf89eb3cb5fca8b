"""Explicit monotone finite-volume solver for

    u_t = (J*u - u) - a (|u|^(q-1) u)_x   (+ eps u_xx, optional)

on a truncated domain with zero extension. One forward-Euler stage per step;
the update is monotone whenever ``dt <= stable_dt``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import Field, lp_norm, mass, write_field_csv
from .kernel import DiscreteKernel, convolve_values

log = logging.getLogger(__name__)

SCHEMES = ("engquist_osher", "godunov", "upwind_positive")


class CFLViolation(ValueError):
    pass


class SolverAbort(RuntimeError):
    """Non-finite state; ``store`` holds everything up to the last good step."""

    def __init__(self, msg, store):
        super().__init__(msg)
        self.store = store


@dataclass(frozen=True)
class SolverConfig:
    q: float
    t_end: float
    a: float = 1.0
    cfl: float = 0.45
    scheme: str = "engquist_osher"
    viscosity_eps: float = 0.0
    snapshot_times: tuple = ()
    max_dt: float | None = None
    conv_path: str = "auto"

    def __post_init__(self):
        if not self.q >= 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.scheme == "upwind_positive" and self.a < 0:
            raise ValueError("upwind_positive requires a >= 0")
        if not self.viscosity_eps >= 0:
            raise ValueError("viscosity_eps must be >= 0")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.max_dt is not None and not self.max_dt > 0:
            raise ValueError("max_dt must be positive")
        ts = tuple(float(t) for t in self.snapshot_times)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot_times must be strictly increasing")
        if ts and (ts[0] < 0 or ts[-1] > self.t_end):
            raise ValueError("snapshot_times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", ts)


def flux(u, q: float, a: float = 1.0):
    u = np.asarray(u, dtype=float)
    return a * np.abs(u) ** (q - 1) * u


def dflux(u, q: float, a: float = 1.0):
    return a * q * np.abs(np.asarray(u, dtype=float)) ** (q - 1)


def numerical_flux(uL, uR, cfg: SolverConfig):
    """Monotone two-point flux ``F(uL, uR)``, consistent: ``F(u, u) = f(u)``."""
    q, a = cfg.q, cfg.a
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    if cfg.scheme == "engquist_osher":
        # f' = a q |u|^(q-1) has the sign of a everywhere, so the split
        # f+ = int_0^u max(f', 0), f- = int_0^u min(f', 0) is f or 0.
        if a >= 0:
            return flux(uL, q, a)
        return flux(uR, q, a)
    if cfg.scheme == "godunov":
        fL, fR = flux(uL, q, a), flux(uR, q, a)
        # the only critical point of f is u = 0
        straddle = (uL * uR) < 0
        f0 = np.zeros_like(fL)
        lo = np.minimum(fL, fR)
        hi = np.maximum(fL, fR)
        lo = np.where(straddle, np.minimum(lo, f0), lo)
        hi = np.where(straddle, np.maximum(hi, f0), hi)
        return np.where(uL <= uR, lo, hi)
    if cfg.scheme == "upwind_positive":
        return flux(uL, q, a)
    raise ValueError(cfg.scheme)


def _dt_limit(u: np.ndarray, dx: float, cfg: SolverConfig, eps: float | None = None) -> float:
    # the coefficient of u_i in (J*u - u) is >= -1, hence the "+ 1"
    eps = cfg.viscosity_eps if eps is None else eps
    speed = float(np.max(dflux(u, cfg.q, abs(cfg.a)), initial=0.0))
    return cfg.cfl / (speed / dx + 1.0 + 2.0 * eps / dx ** 2)


def stable_dt(f: Field, k: DiscreteKernel | None, cfg: SolverConfig) -> float:
    """Largest dt keeping the explicit update monotone, times ``cfl``."""
    return _dt_limit(f.values, f.grid.dx, cfg)


@dataclass
class StepParts:
    conv: np.ndarray       # J*u
    faces: np.ndarray      # F at the n+1 cell faces, ghosts included
    lap: np.ndarray        # zero-extended second difference / dx^2


def _parts(u: np.ndarray, k: DiscreteKernel, cfg: SolverConfig, dx: float) -> StepParts:
    ext = np.concatenate(([0.0], u, [0.0]))
    conv = convolve_values(k.weights, u, dx, cfg.conv_path)
    faces = numerical_flux(ext[:-1], ext[1:], cfg)
    lap = (ext[2:] - 2.0 * u + ext[:-2]) / dx ** 2
    return StepParts(conv, faces, lap)


def _update(u, parts: StepParts, cfg: SolverConfig, dt: float, dx: float) -> np.ndarray:
    du = dt * (parts.conv - u) - (dt / dx) * np.diff(parts.faces)
    if cfg.viscosity_eps:
        du += dt * cfg.viscosity_eps * parts.lap
    return u + du


def step(f: Field, k: DiscreteKernel, cfg: SolverConfig, dt: float) -> Field:
    """One forward-Euler step of the full update."""
    if abs(k.dx - f.grid.dx) > 1e-12 * f.grid.dx:
        raise ValueError("kernel spacing does not match grid spacing")
    limit = stable_dt(f, k, cfg)
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.6g} exceeds the monotone limit {limit:.6g} "
                           f"(max|u|={np.max(np.abs(f.values)):.4g}, dx={f.grid.dx:.4g})")
    parts = _parts(f.values, k, cfg, f.grid.dx)
    new = _update(f.values, parts, cfg, dt, f.grid.dx)
    return Field(f.grid, new, f.nonneg and _nonneg(new))


def _nonneg(v: np.ndarray) -> bool:
    return v.min(initial=0.0) >= -1e-14 * max(1.0, float(np.abs(v).max(initial=0.0)))


@dataclass
class Ledger:
    """Per-step diagnostics. Row 0 is the initial state (dt = 0).

    ``qform`` is the nonlocal dissipation ``int int J(x-y)(u(x)-u(y))^2`` and
    ``dflux`` the convective plus viscous dissipation rate, both at the start
    of the step; ``leak`` is the cumulative mass lost through the boundary.
    """

    t: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    l2sq: list = field(default_factory=list)
    qform: list = field(default_factory=list)
    dflux: list = field(default_factory=list)
    leak: list = field(default_factory=list)

    def append(self, t, dt, m, l2sq, qform, dfl, leak):
        self.t.append(t)
        self.dt.append(dt)
        self.mass.append(m)
        self.l2sq.append(l2sq)
        self.qform.append(qform)
        self.dflux.append(dfl)
        self.leak.append(leak)

    def __len__(self):
        return len(self.t)

    @property
    def dissipation(self) -> np.ndarray:
        return np.asarray(self.dt) * (np.asarray(self.qform) + np.asarray(self.dflux))

    def write_csv(self, path) -> None:
        diss = self.dissipation
        with Path(path).open("w", newline="") as fh:
            fh.write("t,mass,l2sq,dissipation\n")
            for row in zip(self.t, self.mass, self.l2sq, diss):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class SolutionStore:
    times: list
    snapshots: list
    config: SolverConfig | None = None
    kernel: DiscreteKernel | None = None
    ledger: Ledger | None = None

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise ValueError("times and snapshots differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    @classmethod
    def from_function(cls, grid, times, func, nonneg=True) -> "SolutionStore":
        """Store of exact samples ``func(t, x)``; handy for analytic checks."""
        snaps = [Field(grid, func(t, grid.x), nonneg) for t in times]
        return cls(list(map(float, times)), snaps)

    @property
    def grid(self):
        return self.snapshots[0].grid

    def snapshot(self, t: float) -> Field:
        j = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if not np.isclose(self.times[j], t, rtol=1e-12, atol=1e-12):
            raise KeyError(f"no snapshot at t={t:g}")
        return self.snapshots[j]

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for t, f in zip(self.times, self.snapshots):
            p = directory / f"snap_t{t:.17g}.csv"
            write_field_csv(p, f)
            out.append(p)
        if self.ledger is not None:
            p = directory / "ledger.csv"
            self.ledger.write_csv(p)
            out.append(p)
        return out


def iter_steps(phi: Field, k: DiscreteKernel, cfg: SolverConfig):
    """Yield ``(t_new, dt, u_old, u_new, parts)`` for every accepted step.

    ``dt`` comes from :func:`stable_dt` (capped by ``max_dt``) and is clipped
    so every snapshot time and ``t_end`` are hit exactly.
    """
    if abs(k.dx - phi.grid.dx) > 1e-12 * phi.grid.dx:
        raise ValueError("kernel spacing does not match grid spacing")
    if cfg.scheme == "upwind_positive" and phi.values.min() < 0:
        raise ValueError("upwind_positive requires nonnegative data")
    dx = phi.grid.dx
    stops = sorted(set(t for t in cfg.snapshot_times if t > 0) | {cfg.t_end})
    u = phi.values.copy()
    t = 0.0
    for stop in stops:
        while t < stop:
            dt = _dt_limit(u, dx, cfg)
            if cfg.max_dt is not None:
                dt = min(dt, cfg.max_dt)
            if t + dt >= stop * (1 - 1e-13):
                dt = stop - t
                t_new = stop
            else:
                t_new = t + dt
            parts = _parts(u, k, cfg, dx)
            new = _update(u, parts, cfg, dt, dx)
            yield t_new, dt, u, new, parts
            u = new
            t = t_new


def run(phi: Field, k: DiscreteKernel, cfg: SolverConfig) -> SolutionStore:
    """Integrate from ``phi`` to ``cfg.t_end``, recording snapshots and the ledger."""
    if not (np.all(np.isfinite(phi.values))):
        raise ValueError("initial datum must be finite")
    dx = phi.grid.dx
    # a monotone update with f(0) = 0 maps nonnegative states to nonnegative states
    nonneg = bool(phi.values.min() >= 0)
    snap_at = set(cfg.snapshot_times) | {cfg.t_end}
    times, snaps = [0.0], [Field(phi.grid, phi.values, nonneg)]
    ledger = Ledger()
    u0 = phi.values
    ledger.append(0.0, 0.0, mass(phi), float(np.dot(u0, u0) * dx), 0.0, 0.0, 0.0)
    store = SolutionStore(times, snaps, cfg, k, ledger)
    leak = 0.0
    for t_new, dt, u, new, parts in iter_steps(phi, k, cfg):
        if not np.all(np.isfinite(new)):
            raise SolverAbort(f"non-finite state at t={t_new:g}", store)
        qform = 2.0 * float(np.dot(u, u) * dx) - 2.0 * float(np.dot(u, parts.conv) * dx)
        dfl = 2.0 * float(np.dot(u, np.diff(parts.faces)))
        if cfg.viscosity_eps:
            dfl -= 2.0 * cfg.viscosity_eps * float(np.dot(u, parts.lap) * dx)
        # mass that left the domain this step: kernel tails, boundary fluxes, viscosity
        leak += dt * (float(np.sum(u - parts.conv) * dx)
                      + float(parts.faces[-1] - parts.faces[0])
                      + cfg.viscosity_eps * float(u[0] + u[-1]) / dx)
        ledger.append(t_new, dt, float(np.sum(new) * dx), float(np.dot(new, new) * dx),
                      qform, dfl, leak)
        if t_new in snap_at:
            if nonneg and not _nonneg(new):
                log.warning("positivity lost at t=%g (min %.3e)", t_new, new.min())
                nonneg = False
            times.append(t_new)
            snaps.append(Field(phi.grid, new, nonneg))
    return store


def energy_ledger_check(store: SolutionStore) -> np.ndarray:
    """Residuals of the discrete energy balance between consecutive snapshots.

    ``|u(t2)|^2 + sum dt (Q + D) - |u(t1)|^2``; for forward Euler this equals
    ``sum |u^{n+1} - u^n|^2``, which is O(dt) over a fixed time interval.
    """
    led = store.ledger
    t = np.asarray(led.t)
    diss = led.dissipation
    l2 = np.asarray(led.l2sq)
    out = []
    for t1, t2 in zip(store.times, store.times[1:]):
        i1 = int(np.flatnonzero(t == t1)[0])
        i2 = int(np.flatnonzero(t == t2)[0])
        out.append(l2[i2] + diss[i1 + 1:i2 + 1].sum() - l2[i1])
    return np.asarray(out)


def entropy_flux(uL, uR, kval: float, cfg: SolverConfig, dx: float):
    """Numerical entropy flux for ``eta_k(u) = (u - k)^+`` induced by the scheme."""
    a = np.maximum(uL, kval)
    b = np.maximum(uR, kval)
    G = numerical_flux(a, b, cfg) - flux(kval, cfg.q, cfg.a)
    if cfg.viscosity_eps:
        G = G - cfg.viscosity_eps * (b - a) / dx
    return G


def entropy_residual(store: SolutionStore, k_values) -> np.ndarray:
    """Worst Kruzkov cell-entropy residual per step (positive means violation).

    For each step and each ``k`` the residual at cell i is

        eta(u_i^{n+1}) - eta(u_i^n) + dt/dx (G_{i+1/2} - G_{i-1/2})
            - dt eta'(u_i^{n+1}) ((J*u^n)_i - u_i^n)

    with ``eta = (u - k)^+``. The entropy derivative is taken at the new time
    level, for which the inequality holds exactly for a monotone update.
    The steps are replayed deterministically from the first snapshot.
    """
    cfg, k = store.config, store.kernel
    if cfg.scheme not in SCHEMES:
        raise ValueError("entropy residual needs a monotone scheme")
    phi = store.snapshots[0]
    dx = phi.grid.dx
    ks = np.asarray(list(k_values), dtype=float)
    worst = []
    for _, dt, u, new, parts in iter_steps(phi, k, cfg):
        ext = np.concatenate(([0.0], u, [0.0]))
        src = parts.conv - u
        w = -np.inf
        for kv in ks:
            G = entropy_flux(ext[:-1], ext[1:], kv, cfg, dx)
            eta_new = np.maximum(new - kv, 0.0)
            eta_old = np.maximum(u - kv, 0.0)
            deta = (new > kv).astype(float)
            r = eta_new - eta_old + (dt / dx) * np.diff(G) - dt * deta * src
            w = max(w, float(r.max()))
        worst.append(w)
    return np.asarray(worst)


def vanishing_viscosity_compare(phi: Field, k: DiscreteKernel, cfg: SolverConfig,
                                eps_list) -> list[tuple[float, float]]:
    """``[(eps, |u_eps(T) - u_0(T)|_1), ...]`` with every run on the same time steps."""
    eps_list = [float(e) for e in eps_list]
    if any(b > a for a, b in zip(eps_list, eps_list[1:])) or min(eps_list) < 0:
        raise ValueError("eps_list must be nonnegative and decreasing")
    top = max(eps_list)
    # bounds are preserved by the monotone update, so this dt is stable throughout
    dt = _dt_limit(phi.values, phi.grid.dx, cfg, eps=top)
    base = replace(cfg, max_dt=dt, viscosity_eps=0.0, snapshot_times=())
    ref = run(phi, k, base).snapshots[-1]
    out = []
    for e in eps_list:
        if e == 0.0:
            out.append((e, 0.0))
            continue
        ue = run(phi, k, replace(base, viscosity_eps=e)).snapshots[-1]
        out.append((e, lp_norm(ue.with_values(ue.values - ref.values, False), 1)))
    return out
