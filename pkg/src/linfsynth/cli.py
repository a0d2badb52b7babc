"""Command-line front end.

Commands
--------
fit       tune (for ``auto:<kind>``) or use the given lambda/alpha, write weights
effects   fit, then write the synthetic series and horizon ATEs
tune      write the cross-validation RMSE surface
simulate  Monte-Carlo RMSE table for one DGP / error regime

Every run writes ``manifest.json``; ``linfsynth --config manifest.json --out DIR``
repeats the run and reproduces its files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import __version__
from .effects import dynamic_effects, pre_fit_gap, synthetic_series
from .errors import (ConfigError, LinfSynthError, MissingTreatedColumn, ParseError,
                     RaggedRows, BadCutover)
from .model import PanelData, PenaltyKind, PenaltySpec, center_design, validate_panel
from .penalty import solve_penalized
from .qp import SolverSettings
from .sim import TABLE_HORIZONS, TABLE_METHODS, DgpSpec, ErrorSpec, TuningOptions, run_experiment
from .tune import CvMode, cross_validate, make_grid, tune_and_fit

COMMANDS = ("fit", "tune", "effects", "simulate")
STREAMS = {"cv": 0, "simulate": 1}


def substream(seed: int, name: str) -> int:
    """Named child seed derived from the single user seed."""
    return int(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)).generate_state(1)[0])


# --- serialization ----------------------------------------------------------

def fmt(x) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    return _encode(obj, 2, 0) + "\n"


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


# --- ingestion --------------------------------------------------------------

def resolve_t0(time_labels, t0) -> int:
    """Cutover as a period count, from a count or the label of the last pre period.

    A string matching a time label wins over its integer reading.
    """
    labels = [str(t) for t in time_labels]
    if isinstance(t0, str):
        if t0 in labels:
            return labels.index(t0) + 1
        try:
            return int(t0)
        except ValueError:
            raise BadCutover(f"t0 {t0!r} is neither a time label nor a count") from None
    if isinstance(t0, bool) or t0 is None:
        raise BadCutover("t0 is required")
    return int(t0)


def ingest_csv(path, treated: str, t0) -> PanelData:
    """Read a wide panel: header ``time,unit_1,...``; one row per period.

    The treated column is moved to position 0; the remaining units keep
    their file order. Empty or non-numeric cells are errors.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError("file is empty", line=1)
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise ParseError("header needs a time column and at least two units", line=1)
    units = header[1:]
    if len(set(units)) != len(units):
        raise ParseError("duplicate unit names in header", line=1)
    if len(rows) < 2:
        raise ParseError("no data rows after the header", line=2)
    if treated not in units:
        raise MissingTreatedColumn(f"treated column {treated!r} not found in header")
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RaggedRows(f"expected {len(header)} cells, found {len(row)}", line=lineno)
        times.append(row[0].strip())
        vals = []
        for name, cell in zip(units, row[1:]):
            cell = cell.strip()
            if cell == "":
                raise ParseError("empty cell", line=lineno, column=name)
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", line=lineno, column=name) from None
        values.append(vals)
    data = np.array(values)
    ti = units.index(treated)
    order = [ti] + [j for j in range(len(units)) if j != ti]
    return validate_panel(data[:, order], resolve_t0(times, t0),
                          [units[j] for j in order], times)


def write_panel_csv(panel: PanelData, path, time_header: str = "time"):
    _write_csv(path, [time_header, *panel.unit_labels],
               ([t, *map(float, row)] for t, row in zip(panel.time_labels, panel.outcomes)))


# --- configuration ----------------------------------------------------------

@dataclass
class CvConfig:
    k: int = 10
    mode: str = "time"


@dataclass
class GridConfig:
    n_lambda: int = 100
    n_alpha: int = 11
    epsilon: float = 1e-4


@dataclass
class SimConfig:
    dgp: int = 1
    error: str = "iid"
    b: int = 200
    horizons: list = field(default_factory=lambda: list(TABLE_HORIZONS))
    methods: list = field(default_factory=lambda: list(TABLE_METHODS))
    j: int = 30
    t0: int = 100
    t1: int = 10
    delta: float = 3.0
    full_grid: bool = False
    single_period: bool = False
    jobs: int = 1


@dataclass
class RunConfig:
    command: str = "fit"
    input_path: Optional[str] = None
    treated_column: Optional[str] = None
    t0: Optional[object] = None
    penalty: str = "auto:linf"
    lam: Optional[float] = None
    alpha: Optional[float] = None
    seed: int = 0
    cv: CvConfig = field(default_factory=CvConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    simulate: SimConfig = field(default_factory=SimConfig)
    output_dir: str = "out"
    emit: list = field(default_factory=lambda: ["json", "csv"])

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command != "simulate":
            missing = [n for n in ("input_path", "treated_column", "t0") if getattr(self, n) in (None, "")]
            if missing:
                raise ConfigError(f"{self.command} needs {', '.join(missing)}")
            auto, kind = parse_penalty(self.penalty)
            if self.command == "tune" and not kind.tunable:
                raise ConfigError(f"{kind.value} has no hyper-parameters to tune")
            if self.command in ("fit", "effects") and not auto and kind.tunable and self.lam is None:
                raise ConfigError(f"penalty {kind.value} needs --lambda (or use auto:{kind.value})")
        if bad := set(self.emit) - {"json", "csv"}:
            raise ConfigError(f"unknown emit formats {sorted(bad)}")
        if self.cv.mode not in ("time", "unit"):
            raise ConfigError("cv.mode must be 'time' or 'unit'")
        return self

    def to_dict(self, with_output=True) -> dict:
        d = asdict(self)
        if not with_output:
            d.pop("output_dir")
        return d


_SECTIONS = {"cv": CvConfig, "grid": GridConfig, "simulate": SimConfig}


def config_from_dict(d: dict) -> RunConfig:
    """Build a RunConfig, rejecting unknown keys at every level."""
    if "run_config" in d:
        extra = set(d) - {"run_config", "resolved", "version"}
        if extra:
            raise ConfigError(f"unknown manifest keys {sorted(extra)}")
        d = d["run_config"]
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    for k, v in d.items():
        if k in _SECTIONS:
            if not isinstance(v, dict):
                raise ConfigError(f"{k} must be a mapping")
            sub = _SECTIONS[k]
            bad = set(v) - {f.name for f in fields(sub)}
            if bad:
                raise ConfigError(f"unknown {k} keys {sorted(bad)}")
            kwargs[k] = sub(**v)
        else:
            kwargs[k] = v
    return RunConfig(**kwargs)


def parse_penalty(text: str):
    """``"auto:linf"`` -> (True, LINF); ``"ridge"`` -> (False, RIDGE)."""
    auto = text.startswith("auto:")
    return auto, PenaltyKind.parse(text[5:] if auto else text)


# --- commands ---------------------------------------------------------------

def _estimate(cfg: RunConfig, panel: PanelData, settings: SolverSettings):
    auto, kind = parse_penalty(cfg.penalty)
    fit_intercept = kind is not PenaltyKind.CONVENTIONAL_SC
    design = center_design(panel, fit_intercept)
    cv_seed = substream(cfg.seed, "cv")
    post = panel.controls[panel.t0:]
    if auto and kind.tunable:
        fit, cv = tune_and_fit(design, kind, cfg.cv.k, cfg.cv.mode, cv_seed, cfg.grid.n_lambda,
                               cfg.grid.n_alpha, cfg.grid.epsilon, settings, post)
        return fit, {"cv_seed": cv_seed, "lambda": cv.best[0], "alpha": cv.best[1]}
    spec = PenaltySpec(kind, cfg.lam or 0.0, 1.0 if cfg.alpha is None else cfg.alpha, fit_intercept)
    return solve_penalized(design, spec, settings), {"lambda": spec.lam, "alpha": spec.alpha}


def _weights_doc(panel, fit, chosen):
    w = fit.omega_hat
    return {
        "treated": panel.unit_labels[0],
        "t0": panel.t0,
        "penalty": fit.penalty.kind.value,
        "lambda": chosen["lambda"],
        "alpha": chosen["alpha"],
        "mu_hat": fit.mu_hat,
        "pre_rmse": fit.pre_rmse,
        "omega_inf_norm": float(np.max(np.abs(w))),
        "omega_l1_norm": float(np.sum(np.abs(w))),
        "weights": {u: float(v) for u, v in zip(panel.unit_labels[1:], w)},
        "solver": fit.solver_report,
    }


def _emit_weights(cfg, panel, fit, chosen, written):
    doc = _weights_doc(panel, fit, chosen)
    if "json" in cfg.emit:
        _write_text(os.path.join(cfg.output_dir, "weights.json"), dumps(doc))
        written.append("weights.json")
    if "csv" in cfg.emit:
        _write_csv(os.path.join(cfg.output_dir, "weights.csv"), ["unit", "weight"],
                   ([u, float(v)] for u, v in zip(panel.unit_labels[1:], fit.omega_hat)))
        written.append("weights.csv")
    return doc


def _run_fit(cfg, settings, written, resolved, with_effects=False):
    panel = ingest_csv(cfg.input_path, cfg.treated_column, cfg.t0)
    fit, chosen = _estimate(cfg, panel, settings)
    resolved.update(chosen)
    resolved["panel"] = {"T": panel.T, "t0": panel.t0, "J": panel.J}
    _emit_weights(cfg, panel, fit, chosen, written)
    if not with_effects:
        return
    eff = dynamic_effects(panel, fit)
    synth = synthetic_series(panel, fit)
    gap = panel.treated - synth
    _write_csv(os.path.join(cfg.output_dir, "effects.csv"),
               ["time", "actual", "counterfactual", "gap"],
               ([t, float(a), float(c), float(g)]
                for t, a, c, g in zip(panel.time_labels, panel.treated, synth, gap)))
    written.append("effects.csv")
    doc = {"ate": eff.ate, "t1": panel.T1,
           "horizon_ates": {str(h): v for h, v in eff.horizon_ates.items()},
           "pre_gap_rmse": float(np.sqrt(np.mean(pre_fit_gap(panel, fit) ** 2)))}
    _write_text(os.path.join(cfg.output_dir, "ate.json"), dumps(doc))
    written.append("ate.json")


def _run_tune(cfg, settings, written, resolved):
    panel = ingest_csv(cfg.input_path, cfg.treated_column, cfg.t0)
    _, kind = parse_penalty(cfg.penalty)
    design = center_design(panel, kind is not PenaltyKind.CONVENTIONAL_SC)
    grid = make_grid(design, kind, cfg.grid.n_lambda, cfg.grid.n_alpha, cfg.grid.epsilon)
    cv_seed = substream(cfg.seed, "cv")
    n = design.t0 if cfg.cv.mode == "time" else design.J
    cv = cross_validate(design, kind, grid, min(cfg.cv.k, n), cfg.cv.mode, cv_seed, settings,
                        panel.controls[panel.t0:])
    _write_csv(os.path.join(cfg.output_dir, "cv_surface.csv"), ["lambda", "alpha", "rmse"],
               ([float(lam), float(a), float(cv.rmse_surface[i, j])]
                for i, lam in enumerate(grid.lambdas) for j, a in enumerate(grid.alphas)))
    written.append("cv_surface.csv")
    resolved.update({"cv_seed": cv_seed, "lambda": cv.best[0], "alpha": cv.best[1],
                     "folds": [int(f) for f in cv.fold_assignments]})


def _run_simulate(cfg, settings, written, resolved):
    s = cfg.simulate
    spec = DgpSpec(dgp=int(s.dgp), j=int(s.j), t0=int(s.t0), t1=int(s.t1), delta=float(s.delta),
                   error=ErrorSpec(kind=s.error), seed=substream(cfg.seed, "simulate"))
    tuning = (TuningOptions(100, 11, 10, CvMode(cfg.cv.mode), cfg.grid.epsilon) if s.full_grid
              else TuningOptions(mode=CvMode(cfg.cv.mode), epsilon=cfg.grid.epsilon))
    table = run_experiment(spec, s.methods, int(s.b), s.horizons, settings, tuning,
                           single_period=bool(s.single_period), n_jobs=int(s.jobs))
    records = list(table.records())
    if "csv" in cfg.emit:
        _write_csv(os.path.join(cfg.output_dir, "rmse_table.csv"), ["dgp", "method", "horizon", "rmse"],
                   ([r["dgp"], r["method"], r["horizon"], r["rmse"]] for r in records))
        written.append("rmse_table.csv")
    if "json" in cfg.emit:
        _write_text(os.path.join(cfg.output_dir, "rmse_table.json"),
                    dumps({"b": table.b, "rows": records, "failures": table.failures,
                           "n_used": table.n_used}))
        written.append("rmse_table.json")
    resolved.update({"dgp_spec": spec.to_dict(), "tuning": {
        "n_lambda": tuning.n_lambda, "n_alpha": tuning.n_alpha, "k": tuning.k,
        "mode": tuning.mode.value, "epsilon": tuning.epsilon}})


def run(cfg: RunConfig, settings: SolverSettings = SolverSettings()) -> list:
    """Execute ``cfg``; returns the names of the files written."""
    cfg.validate()
    if cfg.input_path is not None:
        cfg.input_path = os.path.abspath(cfg.input_path)
    os.makedirs(cfg.output_dir, exist_ok=True)
    written, resolved = [], {"seed": cfg.seed}
    if cfg.command == "fit":
        _run_fit(cfg, settings, written, resolved)
    elif cfg.command == "effects":
        _run_fit(cfg, settings, written, resolved, with_effects=True)
    elif cfg.command == "tune":
        _run_tune(cfg, settings, written, resolved)
    else:
        _run_simulate(cfg, settings, written, resolved)
    manifest = {"version": __version__, "run_config": cfg.to_dict(with_output=False),
                "resolved": resolved}
    _write_text(os.path.join(cfg.output_dir, "manifest.json"), dumps(manifest))
    written.append("manifest.json")
    return written


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="linfsynth", description="Penalized synthetic control (L-inf, L1+L-inf, ...).")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON run config or a manifest.json from an earlier run")
    p.add_argument("--input")
    p.add_argument("--treated")
    p.add_argument("--t0", help="pre-period count, or the time label of the last pre period")
    p.add_argument("--penalty", help="kind (none|lasso|ridge|elasticnet|linf|l1linf|sc) or auto:<kind>")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--cv-k", type=int)
    p.add_argument("--cv-mode", choices=("time", "unit"))
    p.add_argument("--grid-lambdas", type=int)
    p.add_argument("--grid-alphas", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--b", type=int)
    p.add_argument("--dgp", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--error", choices=("iid", "ar1", "arma11"))
    p.add_argument("--horizons", help="comma-separated, e.g. 1,4,7,10")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(TABLE_METHODS))
    p.add_argument("--full-grid", action="store_true", default=None)
    p.add_argument("--single-period", action="store_true", default=None)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--emit", help="comma-separated subset of json,csv")
    return p


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = config_from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {args.config}: {exc}") from None
    else:
        cfg = RunConfig()
    if args.command:
        cfg.command = args.command
    elif not args.config:
        raise ConfigError("a command (fit, tune, effects, simulate) or --config is required")
    top = {"input": "input_path", "treated": "treated_column", "t0": "t0", "penalty": "penalty",
           "lam": "lam", "alpha": "alpha", "seed": "seed", "out": "output_dir"}
    for arg, attr in top.items():
        v = getattr(args, arg)
        if v is not None:
            setattr(cfg, attr, v)
    if args.cv_k is not None:
        cfg.cv.k = args.cv_k
    if args.cv_mode is not None:
        cfg.cv.mode = args.cv_mode
    if args.grid_lambdas is not None:
        cfg.grid.n_lambda = args.grid_lambdas
    if args.grid_alphas is not None:
        cfg.grid.n_alpha = args.grid_alphas
    if args.epsilon is not None:
        cfg.grid.epsilon = args.epsilon
    sim = {"b": "b", "dgp": "dgp", "error": "error", "full_grid": "full_grid",
           "single_period": "single_period", "jobs": "jobs"}
    for arg, attr in sim.items():
        v = getattr(args, arg)
        if v is not None:
            setattr(cfg.simulate, attr, v)
    try:
        if args.horizons:
            cfg.simulate.horizons = [int(h) for h in args.horizons.split(",")]
    except ValueError:
        raise ConfigError(f"bad --horizons {args.horizons!r}") from None
    if args.methods:
        cfg.simulate.methods = [m.strip() for m in args.methods.split(",")]
    if args.emit:
        cfg.emit = [e.strip() for e in args.emit.split(",")]
    return cfg


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        run(cfg)
    except LinfSynthError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
