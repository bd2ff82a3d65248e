"""
Command-line driver for entropy, residue and correction sweeps.

Every command reads an optional flat ``key = value`` config file, applies
command-line overrides, computes its sweep (optionally on a process pool)
and writes a CSV plus ``<out>.manifest.json`` recording every parameter.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import correction as corr
from . import flow_free, hubbard_flow, oracle
from .errors import ConfigurationError, ConvergenceError, FlowHoloError, PoleError, StiffnessError
from .lattice import LatticeModel, mode_grid
from .quadrature import QuadratureConfig

COMMANDS = ("free-scan", "oracle-scan", "twod-scan", "residue", "correction",
            "divergence-probe", "fit")
SWEEP_MODES = ("fixed_total", "fixed_ratio")


@dataclass
class RunConfig:
    command: str
    out: str = ""
    g: float = 1.0
    u: float = 0.0
    mu: float = 0.0
    cutoff: float = 1.0
    l: list = field(default_factory=lambda: [16.0, 32.0, 64.0, 128.0, 256.0])
    alpha: list = field(default_factory=lambda: [0.25])
    b: list = field(default_factory=lambda: [0.0, 1.0, 10.0, 100.0])
    windows: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    eps0: float = 2.0
    n_modes: int = 0
    n_y: int = 32
    n_total: int = 1024
    sweep_mode: str = "fixed_total"
    ratio: float = 4.0
    spinful: bool = False
    conservation: str = "folded"
    model: str = "log_l"
    input: str = ""
    l_min: float = 0.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    workers: int = 1

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(self.rel_tol, self.abs_tol, self.max_subdivisions)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "command"}
_LIST_KEYS = {"l", "alpha", "b", "windows"}
_INT_KEYS = {"n_modes", "n_y", "n_total", "max_subdivisions", "workers"}
_FLOAT_KEYS = {"g", "u", "mu", "cutoff", "eps0", "ratio", "l_min", "rel_tol", "abs_tol"}
_BOOL_KEYS = {"spinful"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            items = [float(x) for x in raw.split(",") if x.strip()]
            if not items:
                raise ValueError("empty list")
            return items
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
    except ValueError as exc:
        raise ConfigurationError(f"malformed value for key {key!r}: {exc}") from exc
    return raw


def parse_config(text: str, command: str, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from a key=value document plus flag overrides (flags win)."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}")
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw)
    for key, raw in (overrides or {}).items():
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw) if isinstance(raw, str) else raw
    cfg = RunConfig(command=command, **values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if not cfg.out:
        raise ConfigurationError("missing required key 'out'")
    if cfg.command == "fit" and not cfg.input:
        raise ConfigurationError("missing required key 'input'")
    for key in _LIST_KEYS:
        if not getattr(cfg, key):
            raise ConfigurationError(f"sweep list {key!r} must be nonempty")
    if cfg.workers < 1:
        raise ConfigurationError("workers must be >= 1")
    if cfg.sweep_mode not in SWEEP_MODES:
        raise ConfigurationError(f"sweep_mode must be one of {SWEEP_MODES}")
    if cfg.model not in flow_free.FIT_MODELS:
        raise ConfigurationError(f"model must be one of {flow_free.FIT_MODELS}")
    if cfg.conservation not in hubbard_flow.CONSERVATION_RULES:
        raise ConfigurationError(f"conservation must be one of {hubbard_flow.CONSERVATION_RULES}")
    try:
        cfg.quadrature()
        LatticeModel(1, 1, cfg.g, cfg.u, cfg.mu, cfg.spinful)
        if cfg.command == "correction":
            for a in cfg.alpha:
                corr.RegularizationSchedule(a, cfg.eps0)
    except FlowHoloError as exc:
        raise ConfigurationError(str(exc)) from exc
    if cfg.command in ("free-scan", "twod-scan", "correction", "divergence-probe"):
        if cfg.cutoff <= 0 or min(cfg.l) <= 1:
            raise ConfigurationError("cutoff must be positive and every l > 1")
    parent = Path(cfg.out).resolve().parent
    if not parent.is_dir():
        raise ConfigurationError(f"output directory {parent} does not exist")


# -- sweep tasks (module level so they pickle) --------------------------------

def _free_task(args):
    cfg, l, n = args
    model = LatticeModel(n, n, cfg.g, 0.0, cfg.mu, cfg.spinful)
    return flow_free.min_entropy_flow(model, cfg.cutoff, l, cfg.quadrature(), grid_size=n)


def _oracle_task(args):
    cfg, l = args
    l = int(l)
    n_b = cfg.n_total - l if cfg.sweep_mode == "fixed_total" else int(round(cfg.ratio * l))
    if n_b < 1:
        raise ConfigurationError(f"n_total = {cfg.n_total} leaves no room for B at l = {l}")
    return oracle.weak_link_min_entropy(LatticeModel(l, n_b, cfg.g, 0.0, cfg.mu, cfg.spinful))


def _twod_task(args):
    cfg, l, n = args
    model = LatticeModel(n, n, cfg.g, 0.0, cfg.mu, cfg.spinful)
    return flow_free.min_entropy_2d(model, cfg.n_y, cfg.cutoff, l, cfg.quadrature(), grid_size=n)


def _correction_task(args):
    cfg, alpha, l = args
    inp = corr.CorrectionInput(cfg.g, cfg.u, cfg.mu, cfg.cutoff, l)
    return corr.delta_s_regularized(inp, corr.RegularizationSchedule(alpha, cfg.eps0),
                                    cfg.quadrature())


def _run_tasks(fn, tasks, workers, labels):
    try:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(fn, tasks))
        return [fn(t) for t in tasks]
    except (ConvergenceError, StiffnessError, PoleError, ArithmeticError) as exc:
        raise _NumericalFailure(f"{labels}: {exc}") from exc


class _NumericalFailure(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _lengths(cfg: RunConfig) -> list[float]:
    return sorted(set(cfg.l))


def run(cfg: RunConfig) -> list[Path]:
    """Execute one command; returns the paths written."""
    out = Path(cfg.out)
    written = [out]
    extra = {}
    if cfg.command == "free-scan":
        ls = _lengths(cfg)
        n = cfg.n_modes or flow_free.default_grid_size(max(ls))
        extra["grid_size"] = n
        s = _run_tasks(_free_task, [(cfg, l, n) for l in ls], cfg.workers, "free-scan")
        _write_csv(out, ["l_sites", "S_nats"], zip(ls, s))
    elif cfg.command == "oracle-scan":
        ls = _lengths(cfg)
        s = _run_tasks(_oracle_task, [(cfg, l) for l in ls], cfg.workers, "oracle-scan")
        _write_csv(out, ["l_sites", "S_nats"], zip(ls, s))
    elif cfg.command == "twod-scan":
        ls = _lengths(cfg)
        n = cfg.n_modes or flow_free.default_grid_size(max(ls))
        extra["grid_size"] = n
        s = _run_tasks(_twod_task, [(cfg, l, n) for l in ls], cfg.workers, "twod-scan")
        _write_csv(out, ["l_sites", "S_nats"], zip(ls, s))
    elif cfg.command == "residue":
        n = cfg.n_modes or 12
        extra["grid_size"] = n
        grid = mode_grid(n, cfg.mu)
        try:
            curve = hubbard_flow.residue_curve(grid, cfg.u, cfg.b, cfg.conservation)
        except (StiffnessError, FlowHoloError) as exc:
            raise _NumericalFailure(f"residue flow: {exc}") from exc
        _write_csv(out, ["B_inv_t2", "h_fermi", "Z"], zip(curve.b_values, curve.h_fermi, curve.z))
    elif cfg.command == "correction":
        ls, alphas = _lengths(cfg), sorted(set(cfg.alpha))
        tasks = [(cfg, a, l) for a in alphas for l in ls]
        vals = _run_tasks(_correction_task, tasks, cfg.workers, "correction")
        _write_csv(out, ["alpha", "l_sites", "delta_S_nats"],
                   [(a, l, v) for (_, a, l), v in zip(tasks, vals)])
        exp_path = out.with_name(out.stem + "_exponents.csv")
        rows = []
        for a in alphas:
            v = np.array([x for (_, aa, _), x in zip(tasks, vals) if aa == a])
            rows.append((a, 4.0 * a - 2.0, _approach_exponent(np.array(ls), v)))
        _write_csv(exp_path, ["alpha", "closed_form_exponent", "fitted_exponent"], rows)
        written.append(exp_path)
    elif cfg.command == "divergence-probe":
        inp = corr.CorrectionInput(cfg.g, cfg.u, cfg.mu, cfg.cutoff, max(cfg.l))
        windows = sorted(set(cfg.windows), reverse=True)
        try:
            rows = corr.delta_s_unregularized(inp, windows, cfg.quadrature())
        except FlowHoloError as exc:
            raise _NumericalFailure(f"divergence-probe: {exc}") from exc
        _write_csv(out, ["delta_scaled_energy", "delta_S_nats"], rows)
    elif cfg.command == "fit":
        ls, s = _read_scan(Path(cfg.input), cfg.l_min)
        fit = flow_free.fit_scaling(flow_free.EntropyScan(ls, s), cfg.model)
        out.write_text(json.dumps(dataclasses.asdict(fit), indent=2, sort_keys=True) + "\n")
    manifest = out.with_name(out.name + ".manifest.json")
    _write_manifest(manifest, cfg, written, extra)
    written.append(manifest)
    return written


def _approach_exponent(ls, values):
    """Power-law exponent p of |dS(l_{i+1}) - dS(l_i)| ~ l_i^p."""
    if ls.size < 5:
        return float("nan")
    steps = np.abs(np.diff(values))
    if np.any(steps == 0):
        return float("nan")
    fit = flow_free.fit_scaling(flow_free.EntropyScan(ls[:-1], steps), "power_law")
    return fit.slope


def _read_scan(path: Path, l_min: float):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read input {path}: {exc}") from exc
    try:
        data = np.array([[float(r[-2]), float(r[-1])] for r in rows[1:] if r], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"malformed scan CSV {path}: {exc}") from exc
    if data.size == 0:
        raise ConfigurationError(f"scan CSV {path} has no data rows")
    data = data[data[:, 0] >= l_min]
    return data[:, 0], data[:, 1]


def _write_manifest(path: Path, cfg: RunConfig, outputs, extra):
    doc = {
        "package": "flowholo",
        "version": __version__,
        "command": cfg.command,
        "parameters": {k: getattr(cfg, k) for k in _FIELDS},
        "tolerances": {"rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol,
                       "max_subdivisions": cfg.max_subdivisions},
        "outputs": [str(p) for p in outputs],
        **extra,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowholo", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        for key in _FIELDS:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    command = ns.pop("command")
    config_path = ns.pop("config", None)
    try:
        text = Path(config_path).read_text(encoding="utf-8") if config_path else ""
        cfg = parse_config(text, command, ns)
    except (ConfigurationError, OSError) as exc:
        print(f"flowholo: config error: {exc}", file=sys.stderr)
        return 2
    try:
        run(cfg)
    except ConfigurationError as exc:
        print(f"flowholo: config error: {exc}", file=sys.stderr)
        return 2
    except _NumericalFailure as exc:
        print(f"flowholo: numerical failure in {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
