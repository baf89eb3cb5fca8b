"""Declarative studies: TOML spec -> solver runs + analyses -> CSV files + manifest."""
from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from .grid import Field, Grid, lp_norm, mass, read_field_csv, write_field_csv
from .kernel import (Box, Bump, Exponential, Gaussian, KernelSpec, convolve, discretize,
                     load_tabulated_csv)
from .profiles import make_profile
from .solver import SolverAbort, SolverConfig, run

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

STUDIES = ("decay", "convergence", "rescaling", "inequalities", "oracle")


class SpecError(ValueError):
    def __init__(self, msg, key=None, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        if key is not None:
            where += f" [{key}]"
        super().__init__(f"{where}: {msg}" if where else msg)
        self.key = key
        self.line = line


_SCHEMA = {
    "": {"study", "output_dir", "seed"},
    "kernel": {"family", "sigma", "halfwidth", "path", "tail_tol"},
    "initial_datum": {"kind", "mass", "width", "center", "masses", "centers", "widths", "path"},
    "grid": {"half_width", "n"},
    "solver": {"q", "a", "cfl", "scheme", "viscosity_eps", "t_end", "snapshot_times",
               "n_snapshots"},
    "analysis": {"p", "window", "times", "lambdas", "R", "tail_t", "trials", "oracle_fields"},
}


@dataclass(frozen=True)
class AnalysisParams:
    p: tuple = (1.0, 2.0)
    window: tuple = (50.0, 500.0)
    times: tuple = (25.0, 400.0)
    lambdas: tuple = (2.0, 4.0, 8.0, 16.0)
    R: tuple = (10.0, 20.0, 40.0)
    tail_t: tuple = (1.0, 10.0, 100.0)
    trials: int = 1000
    oracle_fields: int = 100


@dataclass(frozen=True)
class ExperimentSpec:
    study: str
    kernel: dict
    initial_datum: dict
    solver: SolverConfig
    grid: Grid
    analysis: AnalysisParams
    output_dir: str
    seed: int = 0
    base_dir: str = "."

    def kernel_spec(self) -> KernelSpec:
        return _build_kernel(self.kernel, Path(self.base_dir))

    def initial_field(self) -> Field:
        return _build_datum(self.initial_datum, self.grid, Path(self.base_dir))

    def canonical(self) -> dict:
        d = {
            "study": self.study,
            "seed": self.seed,
            "kernel": self.kernel,
            "initial_datum": self.initial_datum,
            "solver": asdict(self.solver),
            "grid": {"x_min": self.grid.x_min, "dx": self.grid.dx, "n": self.grid.n},
            "analysis": asdict(self.analysis),
        }
        return json.loads(json.dumps(d, sort_keys=True))

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _key_lines(text: str) -> dict:
    """Map ``(table, key)`` to its 1-based line number in TOML source."""
    out, table = {}, ""
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            table = line.strip("[]").strip()
            out[(table, None)] = no
        elif "=" in line:
            out[(table, line.split("=", 1)[0].strip().strip('"'))] = no
    return out


def _build_kernel(d: dict, base: Path) -> KernelSpec:
    fam = d.get("family", "exponential")
    if fam == "exponential":
        return Exponential()
    if fam == "gaussian":
        return Gaussian(float(d.get("sigma", 1.0)))
    if fam == "box":
        return Box(float(d.get("halfwidth", 1.0)))
    if fam == "bump":
        return Bump(float(d.get("halfwidth", 3.0)))
    if fam == "tabulated":
        return load_tabulated_csv(base / d["path"])
    raise ValueError(f"unknown kernel family {fam!r}")


def _gauss(x, m, w, c):
    return m * np.exp(-0.5 * ((x - c) / w) ** 2) / (w * np.sqrt(2 * np.pi))


def _build_datum(d: dict, grid: Grid, base: Path) -> Field:
    kind = d.get("kind", "gaussian")
    x = grid.x
    if kind == "gaussian":
        v = _gauss(x, float(d.get("mass", 1.0)), float(d.get("width", 1.0)),
                   float(d.get("center", 0.0)))
    elif kind == "box":
        m, w = float(d.get("mass", 1.0)), float(d.get("width", 2.0))
        c = float(d.get("center", 0.0))
        v = np.where(np.abs(x - c) < w / 2, m / w, 0.0)
    elif kind == "two_bump":
        v = sum(_gauss(x, float(m), float(w), float(c))
                for m, c, w in zip(d["masses"], d["centers"], d["widths"]))
        v = np.asarray(v, dtype=float)
    elif kind == "csv":
        f = read_field_csv(base / d["path"])
        if not f.grid.same_as(grid, rtol=1e-9):
            raise ValueError("csv datum grid does not match [grid]")
        v = f.values
    else:
        raise ValueError(f"unknown initial datum kind {kind!r}")
    return Field(grid, v, nonneg=bool(np.min(v) >= 0))


def _tuple(v):
    return tuple(float(t) for t in v)


def _required_times(study: str, a: AnalysisParams) -> set:
    if study == "convergence":
        return set(a.times)
    if study == "rescaling":
        return {lam * lam for lam in a.lambdas}
    return set()


def _default_snapshots(study, a: AnalysisParams, t_end: float, n: int) -> tuple:
    ts = set(np.round(np.geomspace(1.0, t_end, n), 12).tolist()) if t_end > 1 else set()
    ts |= {t for t in _required_times(study, a) if t <= t_end}
    if study == "decay":
        lo, hi = a.window
        ts |= set(np.round(np.geomspace(lo, min(hi, t_end), 12), 12).tolist())
    ts.add(float(t_end))
    return tuple(sorted(ts))


def load_spec(path) -> ExperimentSpec:
    """Parse and validate an experiment file; errors carry file, line and key."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError(f"cannot read spec: {e}", path=path) from e
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise SpecError(f"parse error: {e}", path=path) from e
    lines = _key_lines(text)

    def fail(msg, table, key=None):
        line = lines.get((table, key), lines.get((table, None)))
        name = f"{table}.{key}" if table and key else (key or table)
        raise SpecError(msg, key=name, line=line, path=path)

    for table, allowed in _SCHEMA.items():
        sub = raw if table == "" else raw.get(table, {})
        if table and not isinstance(sub, dict):
            fail("expected a table", table)
        for key in sub:
            if table == "" and key in _SCHEMA and isinstance(sub[key], dict):
                continue
            if key not in allowed:
                fail(f"unknown key {key!r}", table, key)

    study = raw.get("study")
    if study not in STUDIES:
        fail(f"study must be one of {STUDIES}", "", "study")
    if "output_dir" not in raw:
        fail("output_dir is required", "", "output_dir")

    kern = dict(raw.get("kernel", {"family": "exponential"}))
    tail_tol = float(kern.pop("tail_tol", 1e-12))
    kern["tail_tol"] = tail_tol
    try:
        _build_kernel(kern, path.parent)
    except (ValueError, KeyError, OSError) as e:
        fail(str(e), "kernel", "family")

    g = raw.get("grid", {})
    try:
        grid = Grid.symmetric(float(g.get("half_width", 200.0)), int(g.get("n", 2048)))
    except ValueError as e:
        fail(str(e), "grid")

    a = raw.get("analysis", {})
    try:
        ap = AnalysisParams(
            p=_tuple(a.get("p", AnalysisParams.p)),
            window=_tuple(a.get("window", AnalysisParams.window)),
            times=_tuple(a.get("times", AnalysisParams.times)),
            lambdas=_tuple(a.get("lambdas", AnalysisParams.lambdas)),
            R=_tuple(a.get("R", AnalysisParams.R)),
            tail_t=_tuple(a.get("tail_t", AnalysisParams.tail_t)),
            trials=int(a.get("trials", AnalysisParams.trials)),
            oracle_fields=int(a.get("oracle_fields", AnalysisParams.oracle_fields)),
        )
    except (TypeError, ValueError) as e:
        fail(str(e), "analysis")
    if any(p < 1 for p in ap.p):
        fail("norm indices must be >= 1", "analysis", "p")
    if len(ap.window) != 2 or ap.window[0] < 1 or ap.window[1] <= ap.window[0]:
        fail("window must be [t_lo, t_hi] with 1 <= t_lo < t_hi", "analysis", "window")
    if ap.trials < 1:
        fail("trials must be positive", "analysis", "trials")

    s = raw.get("solver", {})
    if "q" in s and float(s["q"]) < 2:
        fail("q must be >= 2", "solver", "q")
    t_end = float(s.get("t_end", max(ap.window[1], 1.0)))
    if study in ("decay", "convergence", "rescaling"):
        need = _required_times(study, ap)
        if study == "decay":
            need |= {ap.window[1]} if ap.p else set()
        late = [t for t in need if t > t_end]
        if late:
            fail(f"analysis references t={max(late):g} beyond t_end={t_end:g}", "solver", "t_end")
    if "snapshot_times" in s:
        snaps = _tuple(s["snapshot_times"])
        if any(b <= a_ for a_, b in zip(snaps, snaps[1:])):
            fail("snapshot_times must be strictly increasing", "solver", "snapshot_times")
        missing = sorted(t for t in _required_times(study, ap) if not np.any(np.isclose(snaps, t)))
        if missing:
            fail(f"snapshot_times lack analysis times {missing}", "solver", "snapshot_times")
        if snaps and snaps[-1] > t_end:
            fail("snapshot time beyond t_end", "solver", "snapshot_times")
    else:
        snaps = _default_snapshots(study, ap, t_end, int(s.get("n_snapshots", 40)))
    try:
        cfg = SolverConfig(q=float(s.get("q", 2.0)), t_end=t_end, a=float(s.get("a", 1.0)),
                           cfl=float(s.get("cfl", 0.45)),
                           scheme=str(s.get("scheme", "engquist_osher")),
                           viscosity_eps=float(s.get("viscosity_eps", 0.0)),
                           snapshot_times=snaps)
    except ValueError as e:
        fail(str(e), "solver")
    if study == "decay" and ap.p:
        inside = [t for t in snaps if ap.window[0] <= t <= ap.window[1]]
        if len(inside) < 8:
            fail("decay window holds fewer than 8 snapshot times", "solver", "snapshot_times")

    datum = dict(raw.get("initial_datum", {"kind": "gaussian"}))
    try:
        phi = _build_datum(datum, grid, path.parent)
    except (ValueError, KeyError, OSError) as e:
        fail(str(e), "initial_datum")
    if study != "inequalities" and study != "oracle":
        if phi.values.min() < 0:
            fail("initial datum must be nonnegative", "initial_datum")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        fail("seed must be a 64-bit unsigned integer", "", "seed")
    out = Path(raw["output_dir"])
    if not out.is_absolute():
        out = path.parent / out
    return ExperimentSpec(study, kern, datum, cfg, grid, ap, str(out), seed, str(path.parent))


# ---------------------------------------------------------------- execution


@dataclass
class Criterion:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""


@dataclass
class RunManifest:
    spec_hash: str
    tool_version: str
    study: str
    output_dir: str
    wall_time: float = 0.0
    files: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def check(self, name, passed, value=None, detail=""):
        self.criteria.append(Criterion(name, bool(passed),
                                       None if value is None else float(value), detail))

    def add_file(self, path: Path):
        path = Path(path)
        data = path.read_bytes()
        rel = str(path.relative_to(self.output_dir))
        self.files = [f for f in self.files if f["path"] != rel]
        self.files.append({"path": rel, "sha256": hashlib.sha256(data).hexdigest(),
                           "bytes": len(data)})

    def to_json(self) -> str:
        d = {
            "spec_hash": self.spec_hash, "tool_version": self.tool_version,
            "study": self.study, "wall_time": self.wall_time,
            "files": sorted(self.files, key=lambda f: f["path"]),
            "criteria": [asdict(c) for c in self.criteria],
            "notes": self.notes, "passed": self.passed,
        }
        return json.dumps(d, indent=2, sort_keys=True)

    def write(self) -> Path:
        p = Path(self.output_dir) / "manifest.json"
        p.write_text(self.to_json() + "\n")
        return p


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_rows(path: Path, header, rows) -> Path:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")
    return Path(path)


def _simulate(spec: ExperimentSpec, man: RunManifest, out: Path):
    phi = spec.initial_field()
    k = discretize(spec.kernel_spec(), spec.grid.dx, spec.kernel["tail_tol"])
    try:
        store = run(phi, k, spec.solver)
        aborted = False
    except SolverAbort as e:
        store, aborted = e.store, True
        man.notes.append(f"solver aborted: {e}")
    for p in store.write(out / "snapshots"):
        man.add_file(p)
    led = store.ledger
    drift = abs(led.mass[-1] - (led.mass[0] - led.leak[-1]))
    man.check("solver_completed", not aborted)
    man.check("mass_conservation", drift <= 1e-9 * max(1.0, abs(led.mass[0])), drift,
              "mass drift after subtracting boundary leak")
    umin = min(float(f.values.min()) for f in store.snapshots)
    man.check("positivity", umin >= -1e-14, umin)
    return phi, k, store


def _decay(spec, man, out, phi, k, store):
    if mass(phi) == 0 and lp_norm(phi, np.inf) == 0:
        man.notes.append("zero initial datum: decay fits skipped")
        return
    rows = []
    for p in spec.analysis.p:
        fit = an.decay_exponent(store, p, spec.analysis.window)
        rows.append((p, *fit.t_window, fit.slope, fit.intercept, fit.r_squared, fit.n_points))
        tol = 0.01 if p == 1 else 0.06
        man.check(f"decay_slope_p{p:g}", abs(fit.slope - fit.expected_slope) <= tol, fit.slope,
                  f"expected {fit.expected_slope:g} +- {tol:g}")
        lo, hi = spec.analysis.window
        man.series[f"decay_p{p:g}"] = (
            ("log_t", "log_norm"),
            [(np.log(t), np.log(lp_norm(f, p))) for t, f in zip(store.times, store.snapshots)
             if lo <= t <= hi])
    if rows:
        man.add_file(write_rows(out / "decay_fits.csv",
                                ("p", "t_lo", "t_hi", "slope", "intercept", "r_squared",
                                 "n_points"), rows))
    C = an.fourier_splitting_bound(store)
    man.add_file(write_rows(out / "fourier_splitting.csv", ("C",), [(C,)]))
    man.check("fourier_splitting_finite", np.isfinite(C), C)


def _profile_kinds(q: float) -> list:
    return ["burgers", "heat"] if q == 2 else ["heat"]


def _convergence(spec, man, out, phi, k, store):
    M = mass(phi)
    if M == 0:
        man.notes.append("zero-mass datum: profile distances skipped")
        return
    A = k.second_moment_A
    times = spec.analysis.times
    rows, dist = [], {}
    for kind in _profile_kinds(spec.solver.q):
        prof = make_profile(kind, M, A)
        dist[kind] = []
        for t in times:
            for p in spec.analysis.p:
                d = an.renormalized_distance(store, prof, p, t)
                rows.append((t, p, kind, d))
                if p == 1:
                    dist[kind].append(d)
        if dist[kind]:
            man.series[f"convergence_{kind}"] = (("t", "distance"), list(zip(times, dist[kind])))
    if rows:
        man.add_file(write_rows(out / "convergence.csv", ("t", "p", "profile", "distance"), rows))
    main = _profile_kinds(spec.solver.q)[0]
    if len(dist.get(main, [])) >= 2:
        first, last = dist[main][0], dist[main][-1]
        man.check(f"convergence_{main}", last < 0.5 * first, last / first,
                  f"L1 distance ratio t={times[-1]:g} / t={times[0]:g}")
    if spec.solver.q == 2 and dist.get("heat"):
        man.check("dichotomy_burgers_closer", dist["burgers"][-1] < dist["heat"][-1],
                  dist["burgers"][-1] - dist["heat"][-1])


def _rescaling(spec, man, out, phi, k, store):
    M = mass(phi)
    if M == 0:
        man.notes.append("zero-mass datum: rescaling distances skipped")
        return
    prof = make_profile(_profile_kinds(spec.solver.q)[0], M, k.second_moment_A)
    lams = spec.analysis.lambdas
    d = [an.rescaled_l1_distance(store, lam, prof) for lam in lams]
    man.add_file(write_rows(out / "rescaling.csv", ("lambda", "distance"), zip(lams, d)))
    man.series["rescaling"] = (("lambda", "distance"), list(zip(lams, d)))
    if len(d) >= 2:
        man.check("rescaling_decreasing", all(b < a for a, b in zip(d, d[1:])), d[-1])


def _inequalities(spec, man, out):
    n = spec.analysis.trials
    seed = spec.seed
    reports = [an.audit_est_ariba(n, seed), an.audit_balance(n, seed + 1),
               an.audit_local_sup(n, seed + 2)]
    rows = [(r.lemma_id, r.trials, r.worst_margin, r.worst_rel_margin, r.violations, r.seed)
            for r in reports]
    man.add_file(write_rows(out / "inequality_reports.csv",
                            ("lemma_id", "trials", "worst_margin", "worst_rel_margin",
                             "violations", "seed"), rows))
    for r in reports:
        man.check(f"inequality_{r.lemma_id}", r.passed, r.violations,
                  f"{r.trials} trials, seed {r.seed}")


def _oracle(spec, man, out):
    rng = np.random.default_rng(spec.seed)
    k = discretize(spec.kernel_spec(), spec.grid.dx, spec.kernel["tail_tol"])
    sizes = (64, 128, 256, 512)
    rows, worst = [], 0.0
    for i in range(spec.analysis.oracle_fields):
        n = sizes[i % len(sizes)]
        f = Field(Grid(0.0, spec.grid.dx, n), rng.normal(size=n))
        a = convolve(k, f, "fft").values
        b = convolve(k, f, "direct").values
        dev = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
        worst = max(worst, dev)
        rows.append((n, i, dev))
    man.add_file(write_rows(out / "oracle.csv", ("n", "trial", "max_rel_dev"), rows))
    man.check("fft_vs_direct", worst <= 1e-12, worst)


def emit_plot_data(man: RunManifest) -> list:
    """Write one ``plot_<series>.csv`` per recorded series and list them in the manifest."""
    out = Path(man.output_dir)
    files = []
    if not man.series:
        man.notes.append("no analysis series selected: no plot data emitted")
        return files
    for name in sorted(man.series):
        header, rows = man.series[name]
        p = write_rows(out / f"plot_{name}.csv", header, rows)
        man.add_file(p)
        files.append(p)
    return files


def execute(spec: ExperimentSpec, studies=None) -> RunManifest:
    """Run a study end to end; writes all outputs and ``manifest.json``."""
    t0 = time.perf_counter()
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    study = spec.study if studies is None else studies
    man = RunManifest(spec.hash, __version__, study, str(out))
    (out / "spec.json").write_text(json.dumps(spec.canonical(), indent=2, sort_keys=True) + "\n")
    man.add_file(out / "spec.json")
    if study in ("decay", "convergence", "rescaling"):
        phi, k, store = _simulate(spec, man, out)
        {"decay": _decay, "convergence": _convergence,
         "rescaling": _rescaling}[study](spec, man, out, phi, k, store)
    elif study == "inequalities":
        _inequalities(spec, man, out)
    elif study == "oracle":
        _oracle(spec, man, out)
    else:
        raise ValueError(f"unknown study {study!r}")
    emit_plot_data(man)
    man.wall_time = time.perf_counter() - t0
    man.write()
    return man
