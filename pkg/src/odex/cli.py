"""Benchmark harness: ``odex run``, ``odex compare``, ``odex assess``.

Experiments are described by flat key-value config files (`key = value`
per line, `#` comments), overridable from the command line with
``--key=value``.  Bundled presets fig1..fig4 reproduce the standard
benchmark configurations.  All trajectory output is deterministic for a
fixed config and seed; timing information only ever goes to stdout.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import rk, solvers
from .diagnostics import estimate_errors
from .errors import ConfigError, OdexError, ParseError
from .gp import DerivOrder, KernelConfig
from .odes import (LinearODEModel, ODESystem, TimeGrid, Trajectory,
                   forced_oscillator, linear_system, van_der_pol)

_METHODS = ("skilling", "explicit", "implicit_sample", "implicit_moment",
            "gradient_match", "linear_gp", "rk45")
_SYSTEMS = ("forced_oscillator", "van_der_pol", "linear")
_FORMATS = ("csv", "json")

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class ExperimentConfig:
    """One resolved benchmark run."""

    system: str
    method: str
    theta: Optional[float] = None
    matrix: Optional[tuple] = None
    phi: Optional[tuple] = None
    noise_var: float = 0.0
    x0: Optional[tuple] = None
    t_start: float = 0.0
    t_end: float = 10.0
    dt: float = 0.25
    window: int = 5
    ensemble: int = 20
    max_iters: int = 50
    fp_tol: float = 1e-8
    use_second_derivatives: bool = False
    skilling_include_values: bool = False
    lengthscale: float = 1.0
    amplitude: float = 1.0
    seed: int = 0
    rtol: float = 1e-6
    atol: float = 1e-9
    output: str = ""
    format: str = "csv"


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "on": True,
               "false": False, "no": False, "0": False, "off": False}


def _parse_bool(text: str, key: str) -> bool:
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {text!r}", field=key)


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", field=key)


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}", field=key)


def _parse_vector(text: str, key: str) -> tuple:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(
            f"{key}: expected comma-separated numbers, got {text!r}", field=key)


def _parse_matrix(text: str, key: str) -> tuple:
    rows = []
    for chunk in text.split(";"):
        rows.append(_parse_vector(chunk, key))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError(f"{key}: ragged matrix rows in {text!r}", field=key)
    return tuple(rows)


_PARSERS = {
    "system": lambda v, k: v.strip(),
    "method": lambda v, k: v.strip(),
    "theta": _parse_float,
    "matrix": _parse_matrix,
    "phi": _parse_vector,
    "noise_var": _parse_float,
    "x0": _parse_vector,
    "t_start": _parse_float,
    "t_end": _parse_float,
    "dt": _parse_float,
    "window": _parse_int,
    "ensemble": _parse_int,
    "max_iters": _parse_int,
    "fp_tol": _parse_float,
    "use_second_derivatives": _parse_bool,
    "skilling_include_values": _parse_bool,
    "lengthscale": _parse_float,
    "amplitude": _parse_float,
    "seed": _parse_int,
    "rtol": _parse_float,
    "atol": _parse_float,
    "output": lambda v, k: v.strip(),
    "format": lambda v, k: v.strip().lower(),
}


def read_config_file(path: str) -> dict:
    """Flat key-value config parsing; raises ParseError with line numbers."""
    raw = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(
                f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}",
                line=lineno)
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError(f"{path}:{lineno}: empty key", line=lineno)
        raw[key] = value.strip()
    return raw


def resolve_config_path(name: str) -> str:
    """Literal paths win; otherwise fall back to the bundled presets."""
    if os.path.exists(name):
        return name
    base = os.path.basename(name)
    for candidate in (base, base + ".cfg"):
        ref = importlib.resources.files("odex") / "presets" / candidate
        if ref.is_file():
            return str(ref)
    raise ConfigError(f"no such config file or preset: {name}")


def build_config(raw: dict) -> ExperimentConfig:
    """Validate raw key-value pairs into an ExperimentConfig."""
    known = {f.name for f in fields(ExperimentConfig)}
    parsed = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}", field=key)
        parsed[key] = _PARSERS[key](value, key) if isinstance(value, str) else value
    env_seed = os.environ.get("ODEX_SEED")
    if env_seed:
        parsed["seed"] = _parse_int(env_seed, "ODEX_SEED")
    cfg = ExperimentConfig(**parsed)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    if cfg.system not in _SYSTEMS:
        raise ConfigError(f"system: unknown system {cfg.system!r} "
                          f"(choose from {', '.join(_SYSTEMS)})", field="system")
    if cfg.method not in _METHODS:
        raise ConfigError(f"method: unknown method {cfg.method!r} "
                          f"(choose from {', '.join(_METHODS)})", field="method")
    if cfg.system in ("forced_oscillator", "van_der_pol") and cfg.theta is None:
        raise ConfigError("theta: required for this system", field="theta")
    if cfg.system == "linear":
        if cfg.matrix is None:
            raise ConfigError("matrix: required for the linear system",
                              field="matrix")
        if cfg.x0 is None:
            raise ConfigError("x0: required for the linear system", field="x0")
    if cfg.method == "linear_gp" and cfg.system != "linear":
        raise ConfigError("method: linear_gp applies only to system = linear",
                          field="method")
    if not (cfg.dt > 0.0):
        raise ConfigError(f"dt: must be positive, got {cfg.dt}", field="dt")
    if not (cfg.t_end > cfg.t_start):
        raise ConfigError("t_end: must exceed t_start", field="t_end")
    span_steps = (cfg.t_end - cfg.t_start) / cfg.dt
    if abs(span_steps - round(span_steps)) > 1e-9 * max(1.0, abs(span_steps)):
        raise ConfigError("dt: span is not an integer number of steps",
                          field="dt")
    if cfg.format not in _FORMATS:
        raise ConfigError(f"format: choose from {', '.join(_FORMATS)}",
                          field="format")
    if cfg.seed < 0:
        raise ConfigError("seed: must be >= 0", field="seed")


def build_system(cfg: ExperimentConfig) -> ODESystem:
    if cfg.system == "forced_oscillator":
        return forced_oscillator(cfg.theta)
    if cfg.system == "van_der_pol":
        return van_der_pol(cfg.theta)
    phi = None if cfg.phi is None else np.asarray(cfg.phi, dtype=float)
    return linear_system(np.asarray(cfg.matrix, dtype=float), phi=phi,
                         x0=np.asarray(cfg.x0, dtype=float), t0=cfg.t_start,
                         noise_var=cfg.noise_var)


def build_grid(cfg: ExperimentConfig) -> TimeGrid:
    count = int(round((cfg.t_end - cfg.t_start) / cfg.dt)) + 1
    return TimeGrid(cfg.t_start, cfg.dt, count)


def initial_state(cfg: ExperimentConfig, system: ODESystem) -> np.ndarray:
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
    elif system.x0_default is not None:
        x0 = np.asarray(system.x0_default, dtype=float)
    else:
        raise ConfigError("x0: required (system has no default)", field="x0")
    if x0.shape != (system.dim,):
        raise ConfigError(
            f"x0: expected {system.dim} components, got {len(x0)}", field="x0")
    return x0


def solver_config(cfg: ExperimentConfig, grid: TimeGrid) -> solvers.SolverConfig:
    return solvers.SolverConfig(
        grid=grid, window=cfg.window, ensemble=cfg.ensemble,
        max_iters=cfg.max_iters, fp_tol=cfg.fp_tol,
        use_second_derivatives=cfg.use_second_derivatives,
        kernel=KernelConfig(cfg.lengthscale, cfg.amplitude),
        seed=cfg.seed, skilling_include_values=cfg.skilling_include_values)


def execute(cfg: ExperimentConfig):
    """Run one experiment; returns (grid, mean, std, f_evals, wall_time_s)."""
    system = build_system(cfg)
    grid = build_grid(cfg)
    x0 = initial_state(cfg, system)
    start = time.perf_counter()
    if cfg.method == "rk45":
        rk_cfg = rk.RKConfig(rtol=cfg.rtol, atol=cfg.atol,
                             initial_step=min(1e-2, cfg.dt))
        traj = rk.rk45_solve(system, x0, (cfg.t_start, cfg.t_end), rk_cfg,
                             output_grid=grid)
        mean, std, f_evals = traj.states, np.zeros_like(traj.states), traj.f_evals
    elif cfg.method == "linear_gp":
        model = LinearODEModel(np.asarray(cfg.matrix, dtype=float),
                               phi=None if cfg.phi is None
                               else np.asarray(cfg.phi, dtype=float),
                               noise_var=cfg.noise_var)
        times = grid.times()
        observations = [(t, model.phi_at(t)) for t in times]
        boundary = [(cfg.t_start, x0, DerivOrder.VALUE)]
        belief = solvers.linear_gp_solve(
            model, observations, boundary, times,
            kernel=KernelConfig(cfg.lengthscale, cfg.amplitude))
        mean, std = solvers.belief_states(belief, grid.count, model.dim)
        f_evals = 0
    else:
        runner = {
            "skilling": solvers.skilling_solve,
            "explicit": solvers.explicit_solve,
            "implicit_sample": solvers.implicit_sample,
            "implicit_moment": solvers.implicit_moment_solve,
            "gradient_match": solvers.gradient_match_solve,
        }[cfg.method]
        ens = runner(system, x0, solver_config(cfg, grid))
        mean, std, f_evals = ens.mean, ens.std, ens.f_evals
    wall = time.perf_counter() - start
    return system, grid, mean, std, f_evals, wall


def _exact_states(system: ODESystem, grid: TimeGrid):
    if system.exact is None:
        return None
    return np.array([system.exact(t) for t in grid.times()])


def _fmt(x: float) -> str:
    return _FLOAT_FMT % float(x)


def write_trajectory(path: str, fmt: str, grid: TimeGrid, mean, std,
                     exact=None):
    """Trajectory table with 17-significant-digit floats and \\n newlines."""
    dim = mean.shape[1]
    times = grid.times()
    err = None if exact is None else np.abs(mean - exact)
    if fmt == "csv":
        header = ["t"]
        header += [f"mean_{k + 1}" for k in range(dim)]
        header += [f"std_{k + 1}" for k in range(dim)]
        if exact is not None:
            header += [f"exact_{k + 1}" for k in range(dim)]
            header += [f"err_{k + 1}" for k in range(dim)]
        rows = [",".join(header)]
        for i in range(grid.count):
            cells = [_fmt(times[i])]
            cells += [_fmt(v) for v in mean[i]]
            cells += [_fmt(v) for v in std[i]]
            if exact is not None:
                cells += [_fmt(v) for v in exact[i]]
                cells += [_fmt(v) for v in err[i]]
            rows.append(",".join(cells))
        payload = "\n".join(rows) + "\n"
    else:
        doc = {"t": [float(t) for t in times],
               "mean": [[float(v) for v in row] for row in mean],
               "std": [[float(v) for v in row] for row in std]}
        if exact is not None:
            doc["exact"] = [[float(v) for v in row] for row in exact]
            doc["err"] = [[float(v) for v in row] for row in err]
        payload = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(payload)


def rmse(mean: np.ndarray, reference: np.ndarray) -> float:
    return float(np.sqrt(np.mean((mean - reference) ** 2)))


def max_abs_error(mean: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(mean - reference)))


def _default_output(cfg: ExperimentConfig) -> str:
    return f"odex_{cfg.system}_{cfg.method}.{cfg.format}"


def cmd_run(args) -> int:
    raw = read_config_file(resolve_config_path(args.config))
    raw.update(args.overrides)
    cfg = build_config(raw)
    if not cfg.output:
        cfg = replace(cfg, output=_default_output(cfg))
    system, grid, mean, std, f_evals, wall = execute(cfg)
    exact = _exact_states(system, grid)
    write_trajectory(cfg.output, cfg.format, grid, mean, std, exact)
    summary = {
        "command": "run",
        "system": cfg.system,
        "method": cfg.method,
        "output": cfg.output,
        "rows": grid.count,
        "rmse": None if exact is None else rmse(mean, exact),
        "max_abs_err": None if exact is None else max_abs_error(mean, exact),
        "f_evals": int(f_evals),
        "wall_time_s": round(wall, 6),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _shared_signature(cfg: ExperimentConfig):
    return (cfg.system, cfg.theta, cfg.matrix, cfg.phi, cfg.x0,
            cfg.t_start, cfg.t_end, cfg.dt)


def cmd_compare(args) -> int:
    cfgs = []
    for name in args.configs:
        raw = read_config_file(resolve_config_path(name))
        raw.update(args.overrides)
        cfgs.append(build_config(raw))
    signature = _shared_signature(cfgs[0])
    for cfg in cfgs[1:]:
        if _shared_signature(cfg) != signature:
            raise ConfigError(
                "compare requires identical system, span, and grid across "
                "configs")
    system = build_system(cfgs[0])
    grid = build_grid(cfgs[0])
    if args.oracle == "exact":
        reference = _exact_states(system, grid)
        if reference is None:
            raise ConfigError(
                "oracle: system has no closed-form solution; use --oracle=rk45",
                field="oracle")
    else:
        x0 = initial_state(cfgs[0], system)
        reference = rk.rk45_solve(system, x0, (grid.t_start, grid.t_end),
                                  rk.tight_reference(), output_grid=grid).states
    rows = []
    for cfg in cfgs:
        _, _, mean, _, f_evals, wall = execute(cfg)
        rows.append({"method": cfg.method,
                     "rmse": rmse(mean, reference),
                     "max_abs_err": max_abs_error(mean, reference),
                     "f_evals": int(f_evals),
                     "wall_time_s": round(wall, 6)})
    rows.sort(key=lambda r: r["rmse"])
    if args.format == "csv":
        lines = ["method,rmse,max_abs_err,f_evals,wall_time_s"]
        for r in rows:
            lines.append(",".join([r["method"], _fmt(r["rmse"]),
                                   _fmt(r["max_abs_err"]), str(r["f_evals"]),
                                   "%.6f" % r["wall_time_s"]]))
        payload = "\n".join(lines) + "\n"
    else:
        payload = json.dumps(rows, sort_keys=True, indent=1) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as handle:
            handle.write(payload)
    else:
        sys.stdout.write(payload)
    return 0


def read_solution_csv(path: str) -> tuple[TimeGrid, np.ndarray]:
    """Parse a solution table with a t column plus x_i or mean_i columns."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = [ln.rstrip("\n") for ln in handle]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty input", line=1)
    header = [h.strip() for h in lines[0].split(",")]
    if "t" not in header:
        raise ParseError(f"{path}:1: no 't' column in header", line=1)
    t_col = header.index("t")
    state_cols = [i for i, h in enumerate(header) if h.startswith("x_")]
    if not state_cols:
        state_cols = [i for i, h in enumerate(header) if h.startswith("mean_")]
    if not state_cols:
        raise ParseError(f"{path}:1: no x_i or mean_i columns in header", line=1)
    times = []
    states = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(
                f"{path}:{lineno}: expected {len(header)} cells, got {len(parts)}",
                line=lineno)
        try:
            times.append(float(parts[t_col]))
            states.append([float(parts[i]) for i in state_cols])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric cell", line=lineno)
    if len(times) < 2:
        raise ParseError(f"{path}: need at least two rows", line=len(lines))
    times = np.asarray(times)
    steps = np.diff(times)
    if np.any(np.abs(steps - steps[0]) > 1e-9 * max(1.0, abs(steps[0]))):
        raise ParseError(f"{path}: time column is not uniformly spaced")
    grid = TimeGrid(float(times[0]), float(steps[0]), len(times))
    return grid, np.asarray(states)


def cmd_assess(args) -> int:
    if args.system not in ("forced_oscillator", "van_der_pol"):
        raise ConfigError(
            f"system: assess supports forced_oscillator and van_der_pol, "
            f"got {args.system!r}", field="system")
    system = (forced_oscillator(args.theta) if args.system == "forced_oscillator"
              else van_der_pol(args.theta))
    grid, states = read_solution_csv(args.input)
    if states.shape[1] != system.dim:
        raise ConfigError(
            f"input: {states.shape[1]} state columns for a {system.dim}-"
            "dimensional system", field="input")
    solution = Trajectory(grid=grid, states=states)
    kernel = KernelConfig(args.lengthscale, args.amplitude)
    report = estimate_errors(system, solution, kernel)
    out_path = args.output
    if not out_path:
        stem, _ = os.path.splitext(args.input)
        out_path = stem + "_assessment.csv"
    dim = system.dim
    header = (["t"] + [f"deriv_err_var_{k + 1}" for k in range(dim)]
              + [f"post_std_{k + 1}" for k in range(dim)])
    lines = [",".join(header)]
    for i, t in enumerate(report.times):
        cells = [_fmt(t)]
        cells += [_fmt(v) for v in report.deriv_error_var[i]]
        cells += [_fmt(v) for v in report.posterior_std[i]]
        lines.append(",".join(cells))
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
    summary = {
        "command": "assess",
        "system": args.system,
        "input": args.input,
        "output": out_path,
        "log_likelihood": report.log_likelihood,
        "log_likelihood_per_knot": report.log_likelihood_per_knot,
        "median_deriv_err_var": float(np.median(report.deriv_error_var)),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _split_overrides(extras) -> dict:
    overrides = {}
    for item in extras:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(
                f"overrides must look like --key=value, got {item!r}")
        key, value = item[2:].split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="odex",
        description="GP-based ODE solver benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="config file path or preset name "
                                      "(fig1..fig4)")

    p_cmp = sub.add_parser("compare", help="run several configs on one "
                                           "system and rank by RMSE")
    p_cmp.add_argument("configs", nargs="+", help="config files or presets")
    p_cmp.add_argument("--oracle", choices=("exact", "rk45"), default="exact")
    p_cmp.add_argument("--output", default="")
    p_cmp.add_argument("--format", choices=_FORMATS, default="csv")

    p_ass = sub.add_parser("assess", help="posterior error estimate for a "
                                          "solution file")
    p_ass.add_argument("--system", required=True)
    p_ass.add_argument("--theta", type=float, required=True)
    p_ass.add_argument("--input", required=True)
    p_ass.add_argument("--output", default="")
    p_ass.add_argument("--lengthscale", type=float, default=1.0)
    p_ass.add_argument("--amplitude", type=float, default=1.0)

    args, extras = parser.parse_known_args(argv)
    try:
        args.overrides = _split_overrides(extras)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if extras:
            raise ConfigError(f"unexpected arguments: {extras}")
        return cmd_assess(args)
    except OdexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
