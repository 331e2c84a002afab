"""Command-line harness: configuration, sweeps and CSV output.

Every run writes comma-separated files whose ``#`` header carries the
complete configuration as JSON, so ``floqphase rerun FILE`` reproduces
the file. Numbers are written with 17 significant digits; angles are in
radians and times in units of ``t_omega = 2 pi / omega`` (``omega_a`` for
composite runs).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import product
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .floquet import TwoLevelParams, evolution_operator_at, solve_floquet
from .oracle import OracleConfig, integrate_single
from .phases import InitialState, default_grid, phase_report, sweep_grid
from .twoqubit import (BASIS_STATES, CompositeParams, CompositeSystem, Delta, composite_rabi,
                       gate_extract)

__all__ = [
    "MODES",
    "PLOT_KINDS",
    "RunConfig",
    "ConfigError",
    "Table",
    "parse_config",
    "serialize_config",
    "config_from_header",
    "run",
    "emit_plot_data",
    "main",
]

MODES = ("single-sweep", "single-point", "composite", "kappa-sweep", "t0-sweep", "gate", "oracle-check")
PLOT_KINDS = ("phase-vs-eps", "phase-vs-omega", "surface", "probability-vs-time", "phase-vs-kappa",
              "phase-vs-t0")
BACKENDS = {"hill": "hill_matrix", "series": "epsilon_series"}
WORKERS_ENV = "FLOQPHASE_WORKERS"

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

_TABLE_ASSUMPTIONS = ("eps_a = eps_b = 0.01, kappa = 0.1, t0 = 0.5 when reproducing the table of "
                      "total phases (its caption leaves them unstated); rows ordered 00, 01, 10, 11")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None, line=None, column=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


def _grid_range(start, stop, step):
    n = (stop - start) / step
    if n < -1e-9:
        raise ValueError("stop is smaller than start")
    k = round(n)
    if abs(n - k) > 1e-9 * max(1.0, abs(n)):
        raise ValueError("(stop - start) is not a multiple of step")
    return tuple(round(start + i * step, 12) for i in range(k + 1))


_EPS, _OMEGA = (tuple(float(x) for x in g) for g in default_grid())

_MODE_DEFAULTS = {
    "single-sweep": {},
    "single-point": {"epsilon": (0.01,), "omega": (2.0,)},
    "composite": {},
    "kappa-sweep": {"kappa": _grid_range(0.0, 0.2, 0.01), "basis": ("00",)},
    "t0-sweep": {"t0": _grid_range(0.05, 6.25, 0.05), "basis": ("00",)},
    "gate": {"omega_b": (1.0, 5.0, 8.0), "kappa": (0.0, 0.1)},
    "oracle-check": {"epsilon": tuple(e for e in _EPS if e <= 0.2)},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run description.

    Grid-valued fields (``epsilon``, ``omega``, ``omega_b``, ``kappa``,
    ``t0``) accept a scalar, a list, or ``{start, stop, step}`` (inclusive).
    ``time`` and the horizons are in units of ``t_omega`` (``omega_a`` for
    composite modes); ``t0`` is an absolute time.
    """

    mode: str = "single-sweep"
    epsilon: tuple = _EPS
    omega: tuple = _OMEGA
    F0: float = 0.0
    A: float = 1.0
    state: tuple = ("1", "0")
    time: float | None = None
    omega_a: float = 1.0
    omega_b: tuple = (2.0,)
    eps_a: float = 0.01
    eps_b: float = 0.01
    kappa: tuple = (0.1,)
    t0: tuple = (0.5,)
    basis: tuple = BASIS_STATES
    horizon: float = 1000.0
    time_step: float = 1.0
    cutoff: int | None = None
    backend: str = "hill"
    tolerance: float = 1e-8
    oracle_tolerance: float = 1e-12
    oracle_horizon: float = 50.0
    oracle_times: int = 100
    points: int = 12
    seed: int = 0
    out: str = "floqphase-out"
    workers: int | None = field(default=None, compare=False)

    @property
    def initial_state(self) -> InitialState:
        c0, c1 = (complex(s) for s in self.state)
        norm = math.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
        return InitialState.from_lab(c0 / norm, c1 / norm)

    def composite(self, omega_b=None, kappa=None, t0=None) -> CompositeParams:
        omega_b = self.omega_b[0] if omega_b is None else omega_b
        kappa = self.kappa[0] if kappa is None else kappa
        t0 = self.t0[0] if t0 is None else t0
        return CompositeParams(TwoLevelParams.make(self.eps_a, self.omega_a, self.F0, self.A),
                               TwoLevelParams.make(self.eps_b, omega_b, self.F0, self.A),
                               kappa, Delta(t0))


_GRID_FIELDS = {"epsilon", "omega", "omega_b", "kappa", "t0"}
_FIELD_NAMES = [f.name for f in fields(RunConfig) if f.name != "workers"]


def _as_float(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}", name)
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite", name)
    return float(value)


def _as_grid(name, value):
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "step"}
        if extra or len(value) != 3:
            raise ConfigError(f"{name}: a range needs exactly start, stop and step", name)
        start, stop, step = (_as_float(name, value[k]) for k in ("start", "stop", "step"))
        if step <= 0:
            raise ConfigError(f"{name}: step must be positive", name)
        try:
            return _grid_range(start, stop, step)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}", name) from None
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"{name}: empty list", name)
        return tuple(_as_float(name, v) for v in value)
    return (_as_float(name, value),)


def _check(cond, name, reason):
    if not cond:
        raise ConfigError(f"{name}: {reason}", name)


def _validate(cfg: RunConfig) -> RunConfig:
    _check(cfg.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
    _check(all(w > 0 for w in cfg.omega), "omega", "must be positive")
    _check(cfg.omega_a > 0, "omega_a", "must be positive")
    _check(all(w > 0 for w in cfg.omega_b), "omega_b", "must be positive")
    _check(all(t > 0 for t in cfg.t0), "t0", "must be positive")
    _check(cfg.time is None or cfg.time > 0, "time", "must be positive")
    _check(cfg.horizon > 0, "horizon", "must be positive")
    _check(cfg.time_step > 0, "time_step", "must be positive")
    _check(cfg.oracle_horizon > 0, "oracle_horizon", "must be positive")
    _check(cfg.oracle_times >= 2, "oracle_times", "needs at least 2 samples")
    _check(cfg.points >= 1, "points", "must be at least 1")
    _check(cfg.tolerance > 0, "tolerance", "must be positive")
    _check(cfg.oracle_tolerance > 0, "oracle_tolerance", "must be positive")
    _check(cfg.cutoff is None or cfg.cutoff >= 8, "cutoff", "must be at least 8")
    _check(cfg.backend in BACKENDS, "backend", f"must be one of {', '.join(BACKENDS)}")
    _check(all(b in BASIS_STATES for b in cfg.basis), "basis", f"labels must be in {BASIS_STATES}")
    _check(bool(cfg.basis), "basis", "empty list")
    for name in ("epsilon", "omega", "omega_b", "kappa", "t0"):
        vals = getattr(cfg, name)
        _check(len(set(vals)) == len(vals), name, "values must be distinct")
        _check(list(vals) == sorted(vals), name, "values must be increasing")
    try:
        c0, c1 = (complex(s) for s in cfg.state)
    except (TypeError, ValueError):
        raise ConfigError("state: expected two amplitudes, e.g. [1, 0] or ['0.6', '0.8j']", "state") from None
    _check(abs(c0) + abs(c1) > 0, "state", "amplitudes are both zero")
    if cfg.mode == "single-point":
        _check(len(cfg.epsilon) == 1, "epsilon", "single-point needs one value")
        _check(len(cfg.omega) == 1, "omega", "single-point needs one value")
    return cfg


def _coerce(raw: dict, mode: str) -> RunConfig:
    unknown = sorted(set(raw) - set(_FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])
    values = dict(_MODE_DEFAULTS.get(mode, {}))
    for name, value in raw.items():
        if name == "mode":
            continue
        if name in _GRID_FIELDS:
            values[name] = _as_grid(name, value)
        elif name in ("F0", "A", "omega_a", "eps_a", "eps_b", "horizon", "time_step", "tolerance",
                      "oracle_tolerance", "oracle_horizon"):
            values[name] = _as_float(name, value)
        elif name == "time":
            values[name] = None if value is None else _as_float(name, value)
        elif name in ("cutoff", "oracle_times", "points", "seed"):
            if value is None and name == "cutoff":
                values[name] = None
                continue
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name}: expected an integer, got {value!r}", name)
            values[name] = value
        elif name == "basis":
            labels = [value] if isinstance(value, str) else list(value or [])
            values[name] = tuple(str(b) for b in labels)
        elif name == "state":
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ConfigError("state: expected two lab-frame amplitudes", name)
            values[name] = tuple(str(v) for v in value)
        elif name in ("backend", "out"):
            if not isinstance(value, str):
                raise ConfigError(f"{name}: expected a string", name)
            values[name] = value
    return _validate(RunConfig(mode=mode, **values))


def parse_config(text: str, mode: str | None = None) -> RunConfig:
    """Parse a YAML document into a validated :class:`RunConfig`.

    ``mode`` (e.g. from the command line) fills in a missing ``mode`` key
    and must agree with it when both are given.
    """
    try:
        raw = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ConfigError(f"syntax error at line {mark.line + 1}, column {mark.column + 1}: "
                              f"{getattr(exc, 'problem', exc)}", line=mark.line + 1,
                              column=mark.column + 1) from None
        raise ConfigError(f"syntax error: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of keys to values")
    doc_mode = raw.get("mode")
    if doc_mode is not None and mode is not None and doc_mode != mode:
        raise ConfigError(f"mode: document says {doc_mode!r} but {mode!r} was requested", "mode")
    mode = doc_mode or mode or "single-sweep"
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {', '.join(MODES)}", "mode")
    return _coerce(raw, mode)


def _plain(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("workers")
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def serialize_config(cfg: RunConfig) -> str:
    """YAML text that :func:`parse_config` maps back to an equal config."""
    return yaml.safe_dump(_plain(cfg), sort_keys=False)


def config_from_header(path) -> RunConfig:
    """Recover the configuration recorded in the header of an output file."""
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config: "):
                raw = json.loads(line[len("# config: "):])
                return _coerce(raw, raw.get("mode", "single-sweep"))
    raise ConfigError(f"{path}: no '# config:' header line")


# output


@dataclass
class Table:
    """Column names plus rows, in a fixed order."""

    columns: tuple
    rows: list = field(default_factory=list)

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path: Path, table: Table, meta: dict | None = None):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# floqphase {__version__}\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _require(table: Table, kind: str, cols):
    missing = [c for c in cols if c not in table.columns]
    if missing:
        raise ValueError(f"{kind}: table lacks column(s) {', '.join(missing)}")


def _group(table: Table, key: str, cols):
    idx = [table.columns.index(c) for c in cols]
    k = table.columns.index(key)
    groups = {}
    for r in table.rows:
        groups.setdefault(r[k], []).append([r[i] for i in idx])
    return groups


_PHASES = ("total", "dynamical", "geometric")
_KIND_SPEC = {
    # kind: (group key or None, x columns, y columns)
    "phase-vs-eps": ("omega", ("epsilon",), _PHASES),
    "phase-vs-omega": ("epsilon", ("omega",), _PHASES),
    "surface": (None, ("epsilon", "omega"), _PHASES),
    "probability-vs-time": ("basis", ("t_tw",), ("P_free", "P_coupled")),
    "phase-vs-kappa": ("basis", ("kappa",), _PHASES),
    "phase-vs-t0": ("basis", ("t0_tw",), _PHASES),
}


def emit_plot_data(table: Table, kind: str, out_dir, meta: dict | None = None) -> list:
    """Write one plain CSV per curve (or one for a surface); returns the paths."""
    if kind not in _KIND_SPEC:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    key, xs, ys = _KIND_SPEC[kind]
    cols = xs + ys
    _require(table, kind, cols + ((key,) if key else ()))
    out_dir = Path(out_dir)
    name = kind.replace("-", "_")
    if key is None or not table.rows:
        idx = [table.columns.index(c) for c in cols]
        rows = [[r[i] for i in idx] for r in table.rows]
        return [_write_csv(out_dir / f"{name}.csv", Table(cols, rows), meta)]
    paths = []
    for value, rows in _group(table, key, cols).items():
        tag = value if isinstance(value, str) else format(value, "g")
        paths.append(_write_csv(out_dir / f"{name}_{key}_{tag}.csv", Table(cols, rows),
                                dict(meta or {}, **{key: value})))
    return paths


# modes


def _meta(cfg: RunConfig, **extra) -> dict:
    meta = {"mode": cfg.mode, "backend": BACKENDS[cfg.backend],
            "cutoff": "auto" if cfg.cutoff is None else cfg.cutoff,
            "config": json.dumps(_plain(cfg), sort_keys=True)}
    meta.update(extra)
    return meta


def _solve(cfg: RunConfig, eps, omega):
    return solve_floquet(TwoLevelParams.make(eps, omega, cfg.F0, cfg.A), cfg.cutoff,
                         BACKENDS[cfg.backend], cfg.tolerance)


def _check_backend(cfg: RunConfig):
    # surfaces an unavailable backend once, as a systemic failure
    _solve(cfg, 0.01, 2.0)


_SWEEP_COLS = ("epsilon", "omega", "omega_rabi", "t_eval", "total", "dynamical", "geometric",
               "dyn_imag_residue", "unitarity_residual", "cutoff", "suspect", "error")


def _run_single_sweep(cfg: RunConfig, out: Path):
    _check_backend(cfg)
    points = sweep_grid(cfg.epsilon, cfg.omega, cfg.initial_state, cfg.F0, cfg.A, cfg.cutoff,
                        cfg.workers)
    rows = []
    for p in points:
        r = p.report
        if r is None:
            rows.append((p.epsilon, p.omega, None, None, None, None, None, None, None, None, None, p.error))
        else:
            rows.append((p.epsilon, p.omega, p.omega_rabi, r.eval_time, r.total, r.dynamical,
                         r.geometric, r.dyn_imag_residue, p.residual, p.cutoff, r.suspect, ""))
    table = Table(_SWEEP_COLS, rows)
    ok = [p for p in points if p.report is not None]
    meta = _meta(cfg, failed_points=len(points) - len(ok),
                 max_unitarity_residual=_fmt(max((p.residual for p in ok), default=math.nan)))
    _write_csv(out / "sweep.csv", table, meta)
    good = Table(table.columns, [r for r in rows if r[-1] == ""])
    for kind in ("phase-vs-eps", "phase-vs-omega", "surface"):
        emit_plot_data(good, kind, out / "plots", {"source": "sweep.csv"})
    return not ok


def _run_single_point(cfg: RunConfig, out: Path):
    sol = _solve(cfg, cfg.epsilon[0], cfg.omega[0])
    t = sol.t_omega * (1.0 if cfg.time is None else cfg.time)
    r = phase_report(sol, cfg.initial_state, t)
    table = Table(_SWEEP_COLS[:-1], [(sol.epsilon, sol.omega, sol.omega_rabi, t, r.total, r.dynamical,
                                      r.geometric, r.dyn_imag_residue, sol.residual, sol.cutoff,
                                      r.suspect)])
    _write_csv(out / "point.csv", table, _meta(cfg))
    return False


def _composite_system(cfg: RunConfig, omega_b=None, kappa=None, t0=None):
    return CompositeSystem(cfg.composite(omega_b, kappa, t0), cfg.cutoff)


def _eval_time(cfg: RunConfig, system: CompositeSystem):
    """Evaluation time (absolute) and the recurrence data, if computed."""
    if cfg.time is not None:
        return cfg.time * system.params.t_omega, None, None
    omega, T = composite_rabi(system.params, system=system)
    return T, omega, T


_PHASE_COLS = ("omega_a", "omega_b", "eps_a", "eps_b", "kappa", "t0", "t0_tw", "t_tw", "basis",
               "total", "dynamical", "geometric", "dyn_imag_residue")


def _phase_rows(system: CompositeSystem, labels, t):
    p = system.params
    tw = p.t_omega
    rows = []
    for label in labels:
        r = system.phases(label, t)
        rows.append((p.sys_a.omega, p.sys_b.omega, p.sys_a.epsilon, p.sys_b.epsilon, p.kappa,
                     p.interaction.t0, p.interaction.t0 / tw, t / tw, label, r.total, r.dynamical,
                     r.geometric, r.dyn_imag_residue))
    return rows


def _run_composite(cfg: RunConfig, out: Path):
    rows, curves = [], []
    rabi = []
    for omega_b, kappa, t0 in product(cfg.omega_b, cfg.kappa, cfg.t0):
        system = _composite_system(cfg, omega_b, kappa, t0)
        t, omega, T = _eval_time(cfg, system)
        if omega is not None:
            rabi.append(f"omega_b={omega_b:g} kappa={kappa:g} t0={t0:g}: "
                        f"Omega={omega:.17g} T_Omega_tw={T / system.params.t_omega:.17g}")
        rows += _phase_rows(system, cfg.basis, t)
        tw = system.params.t_omega
        times = tw * np.arange(0.0, cfg.horizon + 0.5 * cfg.time_step, cfg.time_step)
        free = system.with_kappa(0.0)
        for label in cfg.basis:
            p0 = free.survival(label, times)
            pk = system.survival(label, times)
            curves += [(omega_b, kappa, t0, label, s / tw, a, b) for s, a, b in zip(times, p0, pk)]
    meta = _meta(cfg, **{f"recurrence_{i}": s for i, s in enumerate(rabi)})
    _write_csv(out / "composite.csv", Table(_PHASE_COLS, rows), meta)
    prob = Table(("omega_b", "kappa", "t0", "basis", "t_tw", "P_free", "P_coupled"), curves)
    _write_csv(out / "probability.csv", prob, meta)
    if len(cfg.omega_b) == len(cfg.kappa) == len(cfg.t0) == 1:
        emit_plot_data(prob, "probability-vs-time", out / "plots", {"source": "probability.csv"})
    return False


def _run_param_sweep(cfg: RunConfig, out: Path, name: str):
    base = _composite_system(cfg)
    free = base.with_kappa(0.0)
    # one evaluation time for the whole sweep, so the curves are comparable
    t, omega, T = _eval_time(cfg, free)
    rows = []
    if name == "kappa":
        for kappa in cfg.kappa:
            rows += _phase_rows(base.with_kappa(kappa), cfg.basis, t)
    else:
        for t0 in cfg.t0:
            rows += _phase_rows(base.with_interaction(Delta(t0)), cfg.basis, t)
    table = Table(_PHASE_COLS, rows)
    meta = _meta(cfg, eval_time_tw=_fmt(t / base.params.t_omega))
    fname = f"{name}_sweep.csv"
    _write_csv(out / fname, table, meta)
    emit_plot_data(table, f"phase-vs-{name}", out / "plots", {"source": fname})
    return False


_GATE_COLS = ("omega_a", "omega_b", "kappa", "t0", "t_tw", "Omega", "phi00", "phi01", "phi10", "phi11",
              "is_B_form", "b_phi", "conditional_phase")


def _run_gate(cfg: RunConfig, out: Path):
    rows = []
    for omega_b, kappa, t0 in product(cfg.omega_b, cfg.kappa, cfg.t0):
        system = _composite_system(cfg, omega_b, kappa, t0)
        t, omega, _ = _eval_time(cfg, system)
        g = gate_extract(system.params, t, system=system)
        rows.append((cfg.omega_a, omega_b, kappa, t0, t / system.params.t_omega,
                     omega, *g.phases, g.is_B_form, g.b_phi, g.conditional_phase))
    meta = _meta(cfg, assumptions=_TABLE_ASSUMPTIONS, b_form_tolerance=0.01)
    _write_csv(out / "gate.csv", Table(_GATE_COLS, rows), meta)
    return False


def _run_oracle_check(cfg: RunConfig, out: Path):
    grid = [(e, w) for w in cfg.omega for e in cfg.epsilon]
    rng = np.random.default_rng(cfg.seed)
    pick = sorted(rng.choice(len(grid), size=min(cfg.points, len(grid)), replace=False))
    oc = OracleConfig(cfg.oracle_tolerance, cfg.oracle_tolerance * 1e-2)
    rows, devs = [], []
    for i in pick:
        eps, omega = grid[i]
        try:
            sol = _solve(cfg, eps, omega)
            t = np.linspace(0.0, cfg.oracle_horizon * sol.t_omega, cfg.oracle_times)
            run_ = integrate_single(sol.params, t[-1], oc, t)
            U = evolution_operator_at(sol, t)
            dev = float(np.abs(U - run_.U).max())
            devs.append(dev)
            rows.append((eps, omega, sol.omega_rabi, dev, sol.residual,
                         float(run_.unitarity_defect().max()), ""))
        except NotImplementedError:
            raise
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            rows.append((eps, omega, None, None, None, None, f"{type(exc).__name__}: {exc}"))
    cols = ("epsilon", "omega", "omega_rabi", "max_deviation", "floquet_unitarity",
            "oracle_unitarity", "error")
    meta = _meta(cfg, max_deviation=_fmt(max(devs, default=math.nan)))
    _write_csv(out / "oracle_check.csv", Table(cols, rows), meta)
    return not devs


_RUNNERS = {
    "single-sweep": _run_single_sweep,
    "single-point": _run_single_point,
    "composite": _run_composite,
    "kappa-sweep": lambda cfg, out: _run_param_sweep(cfg, out, "kappa"),
    "t0-sweep": lambda cfg, out: _run_param_sweep(cfg, out, "t0"),
    "gate": _run_gate,
    "oracle-check": _run_oracle_check,
}


def run(cfg: RunConfig, err=None) -> int:
    """Execute ``cfg``; returns 0 on success, 1 on systemic failure.

    Individual points that fail are recorded in their CSV row; only an
    unwritable output directory, an unavailable backend, or a run in which
    nothing could be computed count as systemic failures.
    """
    err = err or sys.stderr
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
        failed = _RUNNERS[cfg.mode](cfg, out)
    except NotImplementedError as exc:
        print(f"floqphase: {exc}", file=err)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"floqphase: cannot write output: {exc}", file=err)
        return EXIT_FAILURE
    except ArithmeticError as exc:
        print(f"floqphase: solver failure: {exc}", file=err)
        return EXIT_FAILURE
    if failed:
        print("floqphase: every point failed; see the error column", file=err)
        return EXIT_FAILURE
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floqphase", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"floqphase {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} mode")
        p.add_argument("--config", type=Path, help="YAML configuration file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--cutoff", type=int, help="Fourier cutoff M (default: automatic)")
        p.add_argument("--backend", choices=sorted(BACKENDS), help="Floquet backend")
        p.add_argument("--tolerance", type=float, help="accepted equation residual of the solver")
    p = sub.add_parser("rerun", help="repeat the run recorded in an output file header")
    p.add_argument("file", type=Path)
    p.add_argument("--out", help="output directory (overrides the recorded one)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "rerun":
            cfg = config_from_header(args.file)
        else:
            text = args.config.read_text() if args.config else ""
            cfg = parse_config(text, args.command)
            overrides = {k: getattr(args, k) for k in ("cutoff", "backend", "tolerance")
                         if getattr(args, k) is not None}
            if overrides:
                cfg = _validate(replace(cfg, **overrides))
        if args.out:
            cfg = replace(cfg, out=args.out)
    except ConfigError as exc:
        print(f"floqphase: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"floqphase: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    workers = os.environ.get(WORKERS_ENV)
    if workers:
        try:
            cfg = replace(cfg, workers=int(workers))
        except ValueError:
            print(f"floqphase: {WORKERS_ENV} must be an integer", file=sys.stderr)
            return EXIT_CONFIG
    return run(cfg)
