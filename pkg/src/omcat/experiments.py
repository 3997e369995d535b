"""Named experiments: config ingestion, sweep orchestration, CSV/JSON output.

Every experiment returns a :class:`ResultBundle`; :func:`write_bundle` turns
it into one CSV per table plus a JSON metadata sidecar.  Physical parameters
in configs are ratios to the mechanical frequency (``omega_m = 1``).
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (negativity_threshold_at_minus_g0, overlap, perturbative_state,
                       undriven_state, undriven_wigner, vacuum_mech_density,
                       vacuum_wigner, vacuum_wigner_correction)
from .evolve import (DriveSchedule, evolve_schedule, evolve_state, truncation_check)
from .fock import (HilbertConfig, TruncationWarning, coherent_state, ket2dm,
                   partial_trace_cavity, product_state, trace_distance)
from .model import SystemParams, build_lab_hamiltonian
from .phasespace import PhaseGrid, WignerGrid, nonclassical_ratio, wigner, wigner_laguerre

log = logging.getLogger(__name__)

EXPERIMENTS = ("wigner-movie", "eta-scan", "eta-dissipation-scan", "overlap-scan",
               "periodicity-check", "vacuum-analysis")
BACKENDS = ("numeric-schrodinger", "numeric-lindblad", "analytic-undriven",
            "analytic-perturbative")
PARAM_KEYS = ("delta", "g0", "epsilon", "kappa", "gamma_m", "n_th")
SWEEPABLE = PARAM_KEYS + ("alpha", "beta", "t")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class ExperimentError(RuntimeError):
    """An experiment could not produce a valid result (e.g. truncation gate)."""


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.name not in SWEEPABLE:
            raise ConfigError(f"unknown sweep parameter {self.name!r}; "
                              f"choose from {', '.join(SWEEPABLE)}")
        if self.count < 1:
            raise ConfigError(f"sweep axis {self.name!r} needs count >= 1")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class ExperimentConfig:
    name: str
    params: SystemParams = field(default_factory=SystemParams)
    alpha: complex = 1.0
    beta: complex = 0.0
    hilbert: HilbertConfig = field(default_factory=lambda: HilbertConfig(8, 300))
    backend: str = "numeric-schrodinger"
    t_pulse: float = math.pi
    t_free: float = 0.0
    times: tuple | None = None
    samples: int = 8
    grid_points: int = 301
    grid_box: tuple | None = None     # (x_min, x_max, p_min, p_max)
    sweep: tuple = ()
    truncation: float = 0.01
    rtol: float | None = None
    atol: float | None = None
    seed: int = 0
    prefix: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.samples < 1 or self.grid_points < 2:
            raise ConfigError("samples must be >= 1 and grid points >= 2")
        if self.t_pulse < 0 or self.t_free < 0:
            raise ConfigError("durations must be non-negative")
        if self.truncation <= 0:
            raise ConfigError("truncation threshold must be positive")

    def resolved(self) -> dict:
        """JSON-ready dictionary holding every setting."""
        return {
            "experiment": self.name,
            "params": dataclasses.asdict(self.params),
            "alpha": _cjson(self.alpha), "beta": _cjson(self.beta),
            "hilbert": {"n_cavity": self.hilbert.n_cavity, "n_mech": self.hilbert.n_mech},
            "backend": self.backend, "t_pulse": self.t_pulse, "t_free": self.t_free,
            "times": list(self.times) if self.times is not None else None,
            "samples": self.samples, "grid_points": self.grid_points,
            "grid_box": list(self.grid_box) if self.grid_box else None,
            "sweep": [dataclasses.asdict(a) for a in self.sweep],
            "truncation": self.truncation, "rtol": self.rtol, "atol": self.atol,
            "seed": self.seed, "prefix": self.prefix, "extra": self.extra,
        }

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _cjson(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def parse_time(text: str) -> float:
    """Float, optionally with a trailing ``pi`` factor (``"pi"``, ``"0.5pi"``, ``"2*pi"``)."""
    s = str(text).strip().lower().replace(" ", "")
    if s.endswith("pi"):
        coef = s[:-2].rstrip("*")
        return (float(coef) if coef else 1.0) * math.pi
    return float(s)


def _complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def default_config(name: str) -> ExperimentConfig:
    """Reference defaults for each experiment (g0 = 1.8, eps = 0.3 unless noted)."""
    ref = SystemParams(g0=1.8, epsilon=0.3)
    if name == "wigner-movie":
        return ExperimentConfig(name, ref, times=tuple(np.linspace(0, 2 * math.pi, 8)))
    if name == "eta-scan":
        return ExperimentConfig(name, ref, sweep=(SweepAxis("delta", -3, 3, 13),
                                                   SweepAxis("g0", 0.2, 2.0, 10)))
    if name == "eta-dissipation-scan":
        p = SystemParams(g0=1.8, epsilon=0.3, gamma_m=1e-4, n_th=10)
        return ExperimentConfig(name, p, hilbert=HilbertConfig(8, 100),
                                backend="numeric-lindblad",
                                sweep=(SweepAxis("kappa", 0, 0.2, 5),))
    if name == "overlap-scan":
        return ExperimentConfig(name, ref, sweep=(SweepAxis("epsilon", 0.0, 0.5, 11),
                                                   SweepAxis("t", 0.25 * math.pi,
                                                             2 * math.pi, 8)))
    if name == "periodicity-check":
        return ExperimentConfig(name, ref, t_free=3 * math.pi)
    if name == "vacuum-analysis":
        return ExperimentConfig(name, SystemParams(g0=1.0, epsilon=0.3), alpha=0,
                                hilbert=HilbertConfig(8, 200), grid_points=201,
                                extra={"eps_min": 0.0, "eps_max": 0.5, "eps_count": 21})
    raise ConfigError(f"unknown experiment {name!r}")


def load_config(path: str | os.PathLike | None, name: str, overrides: dict | None = None
                ) -> ExperimentConfig:
    """Read an INI config and merge it over :func:`default_config`.

    Sections: ``[experiment]`` (name, backend, prefix, seed), ``[params]``,
    ``[initial]`` (alpha, beta), ``[hilbert]`` (n_cavity, n_mech), ``[time]``
    (t_pulse, t_free, samples, times), ``[grid]`` (points, x_min, x_max,
    p_min, p_max), ``[sweep]`` (``axis = start, stop, count``),
    ``[tolerances]`` (truncation, rtol, atol) and ``[extra]``.
    """
    cfg = default_config(name)
    kw: dict = {}
    if path is not None:
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
        try:
            kw = _from_parser(cp, cfg)
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}: {exc}") from exc
        if kw.pop("name", name) != name:
            raise ConfigError(f"config is for experiment {cp['experiment']['name']!r}, "
                              f"not {name!r}")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "n_cavity" in overrides or "n_mech" in overrides:
        h = kw.get("hilbert", cfg.hilbert)
        kw["hilbert"] = HilbertConfig(overrides.pop("n_cavity", h.n_cavity),
                                      overrides.pop("n_mech", h.n_mech))
    kw.update(overrides)
    try:
        return cfg.replace(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _from_parser(cp: configparser.ConfigParser, base: ExperimentConfig) -> dict:
    known = {"experiment", "params", "initial", "hilbert", "time", "grid", "sweep",
             "tolerances", "extra"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    kw: dict = {}
    if cp.has_section("experiment"):
        sec = cp["experiment"]
        for key in sec:
            if key not in ("name", "backend", "prefix", "seed"):
                raise ConfigError(f"unknown key experiment.{key}")
        if "name" in sec:
            kw["name"] = sec["name"].strip()
        if "backend" in sec:
            kw["backend"] = sec["backend"].strip()
        if "prefix" in sec:
            kw["prefix"] = sec["prefix"].strip()
        if "seed" in sec:
            kw["seed"] = sec.getint("seed")
    if cp.has_section("params"):
        vals = {}
        for key, v in cp["params"].items():
            if key not in PARAM_KEYS:
                raise ConfigError(f"unknown parameter params.{key}")
            vals[key] = float(v)
        kw["params"] = base.params.replace(**vals)
    if cp.has_section("initial"):
        for key, v in cp["initial"].items():
            if key not in ("alpha", "beta"):
                raise ConfigError(f"unknown key initial.{key}")
            kw[key] = _complex(v)
    if cp.has_section("hilbert"):
        sec = cp["hilbert"]
        kw["hilbert"] = HilbertConfig(sec.getint("n_cavity", base.hilbert.n_cavity),
                                      sec.getint("n_mech", base.hilbert.n_mech))
    if cp.has_section("time"):
        sec = cp["time"]
        for key, v in sec.items():
            if key in ("t_pulse", "t_free"):
                kw[key] = parse_time(v)
            elif key == "samples":
                kw["samples"] = int(v)
            elif key == "times":
                kw["times"] = tuple(parse_time(x) for x in v.split(",") if x.strip())
            else:
                raise ConfigError(f"unknown key time.{key}")
    if cp.has_section("grid"):
        sec = cp["grid"]
        if "points" in sec:
            kw["grid_points"] = sec.getint("points")
        box = [k for k in ("x_min", "x_max", "p_min", "p_max") if k in sec]
        if box and len(box) != 4:
            raise ConfigError("grid box needs all of x_min, x_max, p_min, p_max")
        if box:
            kw["grid_box"] = tuple(sec.getfloat(k) for k in ("x_min", "x_max", "p_min", "p_max"))
    if cp.has_section("sweep"):
        axes = []
        for key, v in cp["sweep"].items():
            parts = [x.strip() for x in v.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"sweep.{key} must be 'start, stop, count'")
            axes.append(SweepAxis(key, parse_time(parts[0]), parse_time(parts[1]),
                                  int(parts[2])))
        kw["sweep"] = tuple(axes)
    if cp.has_section("tolerances"):
        sec = cp["tolerances"]
        for key in sec:
            if key not in ("truncation", "rtol", "atol"):
                raise ConfigError(f"unknown key tolerances.{key}")
            kw[key] = sec.getfloat(key)
    if cp.has_section("extra"):
        kw["extra"] = {**base.extra, **{k: _auto(v) for k, v in cp["extra"].items()}}
    return kw


def _auto(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return parse_time(text)
    except ValueError:
        return text


# ---------------------------------------------------------------------------
# results

@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} entries, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))


@dataclass
class ResultBundle:
    config: ExperimentConfig
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    truncation: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def metadata(self) -> dict:
        return {"experiment": self.config.name, "version": __version__,
                "config": self.config.resolved(), "wall_time_s": self.wall_time,
                "truncation": self.truncation, "summary": self.summary,
                "tables": {k: {"columns": t.columns, "rows": len(t.rows)}
                           for k, t in self.tables.items()}}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_bundle(bundle: ResultBundle, out_dir: str | os.PathLike) -> list[Path]:
    """Write ``<prefix><table>.csv`` files and ``<prefix>metadata.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = bundle.config.prefix
    paths = []
    meta = bundle.metadata()
    for name, table in bundle.tables.items():
        path = out / f"{prefix}{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_fmt(v) for v in row])
        meta["tables"][name]["file"] = path.name
        paths.append(path)
    path = out / f"{prefix}metadata.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    paths.append(path)
    return paths


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


# ---------------------------------------------------------------------------
# shared helpers

def _grid(cfg: ExperimentConfig, params: SystemParams, beta=None) -> PhaseGrid:
    n = cfg.grid_points
    if cfg.grid_box:
        return PhaseGrid(*cfg.grid_box, n, n)
    return PhaseGrid.for_params(params.g_tilde, cfg.hilbert.n_cavity,
                                cfg.beta if beta is None else beta, n=n)


def _initial(cfg: ExperimentConfig, alpha=None, beta=None, density=False):
    h = cfg.hilbert
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        psi = product_state(coherent_state(h.n_cavity, cfg.alpha if alpha is None else alpha),
                            coherent_state(h.n_mech, cfg.beta if beta is None else beta))
    return ket2dm(psi) if density else psi


def _tol(cfg: ExperimentConfig) -> dict:
    kw = {}
    if cfg.rtol is not None:
        kw["rtol"] = cfg.rtol
    if cfg.atol is not None:
        kw["atol"] = cfg.atol
    return kw


def _propagate(cfg: ExperimentConfig, params: SystemParams, schedule: DriveSchedule,
               times, alpha=None, beta=None, store="mech"):
    """Run a drive schedule with the backend implied by ``params`` and ``cfg``."""
    density = params.dissipative or cfg.backend == "numeric-lindblad"
    rho0 = _initial(cfg, alpha, beta, density=density)
    return evolve_schedule(params, cfg.hilbert, schedule, rho0, times=times, store=store,
                           **_tol(cfg))


def _sweep_points(cfg: ExperimentConfig) -> list[dict]:
    if not cfg.sweep:
        return [{}]
    grids = np.meshgrid(*[a.values() for a in cfg.sweep], indexing="ij")
    names = [a.name for a in cfg.sweep]
    return [dict(zip(names, (float(g.flat[i]) for g in grids))) for i in range(grids[0].size)]


def _apply_point(cfg: ExperimentConfig, point: dict):
    pvals = {k: v for k, v in point.items() if k in PARAM_KEYS}
    params = cfg.params.replace(**pvals)
    alpha = point.get("alpha", cfg.alpha)
    beta = point.get("beta", cfg.beta)
    return params, alpha, beta


def _map(fn, tasks, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _summarise_truncation(rows) -> dict:
    devs_a = [r["dev_a"] for r in rows if r.get("dev_a") is not None]
    devs_b = [r["dev_b"] for r in rows if r.get("dev_b") is not None]
    return {"max_dev_a": max(devs_a, default=None), "max_dev_b": max(devs_b, default=None),
            "flagged_points": sum(1 for r in rows if r.get("flagged"))}


# ---------------------------------------------------------------------------
# eta scans

def _eta_point(task) -> dict:
    cfg, point = task
    out = {"point": point, "eta": math.nan, "w_min": math.nan, "norm": math.nan,
           "dev_a": None, "dev_b": None, "flagged": False, "error": ""}
    try:
        params, alpha, beta = _apply_point(cfg, point)
        sched = DriveSchedule(((cfg.t_pulse, params.epsilon),))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            traj = _propagate(cfg, params, sched, [0.0, cfg.t_pulse], alpha, beta)
        rep = truncation_check(traj, cfg.truncation)
        out.update(dev_a=rep.max_dev_a, dev_b=rep.max_dev_b, flagged=not rep.clean)
        if not rep.clean:
            out["error"] = "truncation"
        w = wigner(traj.states[-1], _grid(cfg, params, beta))
        out["w_min"] = w.min()
        out["norm"] = w.integral()
        out["eta"] = nonclassical_ratio(w)
    except Exception as exc:   # recorded per point, the scan continues
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def run_eta_scan(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    """eta after driving for ``t_pulse`` over the sweep grid."""
    points = _sweep_points(cfg)
    results = _map(_eta_point, [(cfg, p) for p in points], workers)
    names = [a.name for a in cfg.sweep]
    table = Table(names + ["eta", "w_min", "wigner_integral", "comm_dev_a", "comm_dev_b",
                           "valid", "error"])
    for r in results:
        valid = not r["error"] and math.isfinite(r["eta"])
        table.add(*[r["point"][n] for n in names], r["eta"], r["w_min"], r["norm"],
                  r["dev_a"], r["dev_b"], valid, r["error"])
    return ResultBundle(cfg, {"eta": table},
                        summary={"points": len(points),
                                 "invalid": sum(1 for row in table.rows if not row[-2])},
                        truncation=_summarise_truncation(results))


def run_eta_dissipation_scan(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    """Same as :func:`run_eta_scan` with the Lindblad backend forced."""
    return run_eta_scan(cfg.replace(backend="numeric-lindblad"), workers)


# ---------------------------------------------------------------------------
# Wigner movie

def run_wigner_movie(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    """Wigner grids of the mechanical state at ``cfg.times`` (constant drive)."""
    times = np.asarray(cfg.times if cfg.times is not None
                       else np.linspace(0, 2 * math.pi, cfg.samples))
    params = cfg.params
    grid = _grid(cfg, params)
    diag = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        if cfg.backend.startswith("numeric"):
            sched = DriveSchedule(((float(times[-1]), params.epsilon),))
            traj = _propagate(cfg, params, sched, times)
            rep = truncation_check(traj, cfg.truncation)
            if not rep.clean:
                raise ExperimentError(
                    f"truncation gate failed at t = {rep.flagged_times.tolist()} "
                    f"(max deviations a: {rep.max_dev_a:.3g}, b: {rep.max_dev_b:.3g}); "
                    "increase n_cavity / n_mech")
            grids = [wigner(rho, grid) for rho in traj.states]
            diag = {"max_dev_a": rep.max_dev_a, "max_dev_b": rep.max_dev_b}
        elif cfg.backend == "analytic-undriven":
            # closed-form Gaussian mixture: no mechanical cut-off involved
            grids = [WignerGrid(grid, undriven_wigner(params, cfg.alpha, cfg.beta, t,
                                                      cfg.hilbert.n_cavity, grid.points()))
                     for t in times]
        else:
            grids = [wigner(partial_trace_cavity(
                perturbative_state(params, cfg.alpha, cfg.beta, t, cfg.hilbert), cfg.hilbert),
                grid) for t in times]
    frames = Table(["frame", "t", "w_min", "w_max", "wigner_integral", "eta"])
    tables = {}
    negative = []
    for i, (t, w) in enumerate(zip(times, grids)):
        eta = nonclassical_ratio(w, tol=1.0)
        frames.add(i, float(t), w.min(), w.max(), w.integral(), eta)
        negative.append(w.min() < -0.05 * w.max())
        tab = Table(["x", "p", "W"])
        xs, ps = grid.xs, grid.ps
        for a, x in enumerate(xs):
            for b, p in enumerate(ps):
                tab.add(float(x), float(p), float(w.values[a, b]))
        tables[f"wigner_frame{i:02d}"] = tab
    tables = {"frames": frames, **tables}
    return ResultBundle(cfg, tables, truncation=diag,
                        summary={"frames": len(times), "any_negative_frame": any(negative),
                                 "all_nonnegative": all(r[2] >= -1e-9 for r in frames.rows)})


# ---------------------------------------------------------------------------
# overlap scan

def _overlap_point(task) -> dict:
    cfg, eps, times = task
    params = cfg.params.replace(epsilon=eps)
    out = {"eps": eps, "undriven": [], "pert": [], "dev_a": None, "dev_b": None,
           "flagged": False, "error": ""}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            grid_t = np.concatenate([[0.0], times]) if times[0] > 0 else np.asarray(times)
            traj = evolve_state(build_lab_hamiltonian(params, cfg.hilbert), _initial(cfg),
                                grid_t, cfg.hilbert, **_tol(cfg))
            rep = truncation_check(traj, cfg.truncation)
            out.update(dev_a=rep.max_dev_a, dev_b=rep.max_dev_b, flagged=not rep.clean)
            states = traj.states[len(grid_t) - len(times):]
            for t, psi in zip(times, states):
                und = undriven_state(params.replace(epsilon=0), cfg.alpha, cfg.beta, t,
                                     cfg.hilbert)
                pert = perturbative_state(params, cfg.alpha, cfg.beta, t, cfg.hilbert,
                                          check=False)
                out["undriven"].append(abs(overlap(psi, und)))
                out["pert"].append(abs(overlap(psi, pert)))
        if not rep.clean:
            out["error"] = "truncation"
    except Exception as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def run_overlap_scan(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    """|<psi_num|psi_undriven>| and |<psi_num|psi_pert>| over (epsilon, t)."""
    axes = {a.name: a.values() for a in cfg.sweep}
    eps_vals = axes.get("epsilon", np.array([cfg.params.epsilon]))
    times = np.sort(np.asarray(axes.get("t", np.array([cfg.t_pulse]))))
    if np.any(times < 0):
        raise ConfigError("overlap-scan times must be non-negative")
    cut = cfg.t_pulse
    if not np.any(np.isclose(times, cut)):
        times = np.sort(np.append(times, cut))
    results = _map(_overlap_point, [(cfg, float(e), times) for e in eps_vals], workers)
    grid_tab = Table(["epsilon", "t", "overlap_undriven", "overlap_perturbative", "valid",
                      "error"])
    cut_tab = Table(["epsilon", "overlap_undriven", "overlap_perturbative", "valid"])
    for r in results:
        ok = not r["error"]
        for i, t in enumerate(times):
            u = r["undriven"][i] if i < len(r["undriven"]) else math.nan
            p = r["pert"][i] if i < len(r["pert"]) else math.nan
            grid_tab.add(r["eps"], float(t), u, p, ok, r["error"])
            if np.isclose(t, cut):
                cut_tab.add(r["eps"], u, p, ok)
    return ResultBundle(cfg, {"overlap": grid_tab, "overlap_cut": cut_tab},
                        summary={"cut_time": cut},
                        truncation=_summarise_truncation(results))


# ---------------------------------------------------------------------------
# periodicity check

def run_periodicity_check(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    """Pulse for ``t_pulse`` then evolve freely for ``t_free``; compare rho_b(t)
    with rho_b(t + period) after switch-off and sample eta along the way."""
    params = cfg.params
    period = params.period
    if cfg.t_free < period:
        raise ConfigError("t_free must be at least one mechanical period")
    per = max(cfg.samples, 1)
    dt = period / per
    n_after = int(math.floor(cfg.t_free / dt + 1e-9))
    after = cfg.t_pulse + dt * np.arange(n_after + 1)
    during = np.linspace(0, cfg.t_pulse, per + 1)[:-1] if cfg.t_pulse > 0 else np.array([])
    times = np.concatenate([during, after])
    sched = DriveSchedule(((cfg.t_pulse, params.epsilon), (cfg.t_free, 0.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        traj = _propagate(cfg, params, sched, times)
    rep = truncation_check(traj, cfg.truncation)
    grid = _grid(cfg, params)
    eta_tab = Table(["t", "eta", "w_min", "comm_a", "comm_b", "driven", "flagged"])
    etas = []
    for i, (t, rho) in enumerate(zip(traj.times, traj.states)):
        w = wigner(rho, grid)
        e = nonclassical_ratio(w, tol=1.0)
        etas.append(e)
        flagged = bool(abs(traj.diagnostics["comm_a"][i] - 1) > cfg.truncation
                       or abs(traj.diagnostics["comm_b"][i] - 1) > cfg.truncation)
        eta_tab.add(float(t), e, w.min(), traj.diagnostics["comm_a"][i],
                    traj.diagnostics["comm_b"][i], bool(t < cfg.t_pulse - 1e-12), flagged)
    per_tab = Table(["t", "t_plus_period", "trace_distance"])
    offset = len(during)
    dists = []
    for j in range(n_after + 1 - per):
        a, b = traj.states[offset + j], traj.states[offset + j + per]
        d = trace_distance(a, b)
        dists.append(d)
        per_tab.add(float(after[j]), float(after[j + per]), d)
    summary = {"max_trace_distance": max(dists, default=None),
               "eta_switch_off": etas[offset],
               "eta_first_revival": etas[offset + per] if offset + per < len(etas) else None,
               "truncation_clean": rep.clean}
    return ResultBundle(cfg, {"periodicity": per_tab, "eta": eta_tab}, summary=summary,
                        truncation={"max_dev_a": rep.max_dev_a, "max_dev_b": rep.max_dev_b,
                                    "flagged_times": rep.flagged_times.tolist()})


# ---------------------------------------------------------------------------
# vacuum analysis

def first_sign_change(xs, ys) -> float | None:
    """Linearly interpolated position of the first + to - crossing of ``ys``."""
    for i in range(len(xs) - 1):
        if ys[i] > 0 >= ys[i + 1]:
            return float(xs[i] + (xs[i + 1] - xs[i]) * ys[i] / (ys[i] - ys[i + 1]))
    return None


def _vacuum_point(task) -> dict:
    cfg, eps = task
    params = cfg.params.replace(epsilon=eps)
    t = cfg.t_pulse
    xi = complex(-params.g_tilde)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        traj = _propagate(cfg, params, DriveSchedule(((t, eps),)), [0.0, t], alpha=0, beta=0)
    rep = truncation_check(traj, cfg.truncation)
    return {"eps": eps, "numeric": float(wigner_laguerre(traj.states[-1], xi)),
            "analytic": float(vacuum_wigner(params, t, xi)),
            "w1": float(vacuum_wigner_correction(params, t, xi)),
            "dev_a": rep.max_dev_a, "dev_b": rep.max_dev_b, "flagged": not rep.clean,
            "rho": traj.states[-1] if eps == cfg.params.epsilon else None}


def run_vacuum_analysis(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    """Vacuum-initial-state negativity at ``xi = -g``: threshold, analytic and
    numeric curves, and analytic/numeric Wigner grids at ``params.epsilon``."""
    params = cfg.params
    t = cfg.t_pulse
    ex = cfg.extra
    eps_vals = np.linspace(float(ex.get("eps_min", 0.0)), float(ex.get("eps_max", 0.5)),
                           int(ex.get("eps_count", 21)))
    eps_vals = np.unique(np.append(eps_vals, params.epsilon))
    lam = params.g_tilde ** 2
    try:
        eps_c = negativity_threshold_at_minus_g0(params)
        integer = True
    except ValueError:
        eps_c, integer = None, False
    vcfg = cfg.replace(alpha=0, beta=0)
    results = _map(_vacuum_point, [(vcfg, float(e)) for e in eps_vals], workers)
    curve = Table(["epsilon", "W_numeric", "W_analytic", "W1", "flagged"])
    for r in results:
        curve.add(r["eps"], r["numeric"], r["analytic"], r["w1"], r["flagged"])
    star_num = first_sign_change(eps_vals, [r["numeric"] for r in results])
    star_an = first_sign_change(eps_vals, [r["analytic"] for r in results])

    def bracketed(star):
        if eps_c is None:
            return star is None
        return star is not None and 0.5 * eps_c <= star <= 2 * eps_c

    grid = _grid(vcfg, params, beta=0)
    rho_num = next(r["rho"] for r in results if r["rho"] is not None)
    w_num = wigner(rho_num, grid)
    w_an = wigner(vacuum_mech_density(params, t, cfg.hilbert.n_mech), grid)
    tables = {"curve": curve}
    for name, w in (("wigner_numeric", w_num), ("wigner_analytic", w_an)):
        tab = Table(["x", "p", "W"])
        for a, x in enumerate(grid.xs):
            for b, p in enumerate(grid.ps):
                tab.add(float(x), float(p), float(w.values[a, b]))
        tables[name] = tab
    summary = {"g_tilde_squared": lam, "integer_g_squared": integer,
               "eps_threshold": eps_c, "sign_change_numeric": star_num,
               "sign_change_analytic": star_an, "bracket_numeric": bracketed(star_num),
               "bracket_analytic": bracketed(star_an)}
    bundle = ResultBundle(cfg, tables, summary=summary,
                          truncation=_summarise_truncation(results))
    if integer and not bracketed(star_num):
        bundle.summary["error"] = "numeric sign change does not bracket the threshold"
    return bundle


RUNNERS = {
    "wigner-movie": run_wigner_movie,
    "eta-scan": run_eta_scan,
    "eta-dissipation-scan": run_eta_dissipation_scan,
    "overlap-scan": run_overlap_scan,
    "periodicity-check": run_periodicity_check,
    "vacuum-analysis": run_vacuum_analysis,
}


def run(cfg: ExperimentConfig, workers: int = 1) -> ResultBundle:
    start = time.perf_counter()
    bundle = RUNNERS[cfg.name](cfg, workers)
    bundle.wall_time = time.perf_counter() - start
    return bundle
