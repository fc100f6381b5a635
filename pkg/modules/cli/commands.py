"""
Command line of noisecalc.

Every subcommand reads one RunConfig, writes its results under the output
directory and prints a single summary line on stdout. Exit codes: 0 on
success, 2 for a rejected config or input, 3 for numerical failure, 1 for
anything unexpected.
"""

import sys
import math
import logging
import argparse
import traceback
from dataclasses import replace

import numpy as np

from modules.cli.config import (
    EXPERIMENTS,
    RunConfig,
    langevin_params,
    number,
    relativistic_params,
    text,
)
from modules.expr import ExprError, ExprEvaluationError, parse
from modules.fokker_planck import CriticalKind, FpeProblem, admissible_dt, critical_points, evolve_fpe, stationary_density
from modules.integrals import EvaluationRule, convergence_table
from modules.paths import generate_brownian, uniform_grid, write_path_csv
from modules.physics import ModelTrio, hitting_study, rest_start_diagnostics, trio_for
from modules.sde import Interpretation, to_ito
from modules.solvers import McConfig, hitting_time, simulate_driven, simulate_ensemble
from modules.utils.errors import ConfigError, InvalidInputError, NoiseCalcError, NumericalError
from modules.utils.io import json_number, write_csv, write_json

logger = logging.getLogger("noisecalc.cli")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def cmd_integrate(cfg):
    """Convergence tables of sum phi(X) dX under each rule on one sample path."""
    block = cfg.block("integrate")
    phi = parse(text(block, "phi", "integrate", default="x")).as_function()
    process = text(block, "process", "integrate", default="brownian")
    if process not in ("brownian", "model"):
        raise ConfigError(f"'integrate.process' must be brownian or model, got {process!r}")
    t0 = number(block, "t0", "integrate", default=0.0)
    t1 = number(block, "t1", "integrate", default=1.0)
    n_steps = number(block, "n_steps", "integrate", default=1024, positive=True, integer=True)
    levels = number(block, "levels", "integrate", default=6, integer=True)
    rules = block.get("rules", ["left", "midpoint", "right"])
    if not isinstance(rules, list) or not rules:
        raise ConfigError("'integrate.rules' must be a non-empty list")
    rules = [EvaluationRule.parse(r) for r in rules]

    seed = cfg.seed
    driver = generate_brownian(uniform_grid(t0, t1, n_steps), seed.child(0))
    path, resimulate = driver, None
    if process == "model":
        model = cfg.model()
        scheme = cfg.scheme(model)
        path = _driven(model, scheme, driver)
        resimulate = lambda w: _driven(model, scheme, w)

    written = []
    for rule in rules:
        table = convergence_table(phi, path, levels, seed.child(1), rule,
                                  driver=driver if resimulate else None, resimulate=resimulate)
        if table.diverged_at is not None:
            raise NumericalError(f"{rule.value} sum diverged at refinement level {table.diverged_at}")
        if cfg.format == "json":
            written.append(write_json(cfg.out_dir / f"convergence_{rule.value}.json", {
                "rule": rule.value,
                "rows": [{"n_steps": n, "value": v} for n, v in table.rows],
                "extrapolated": json_number(table.extrapolated),
            }))
        else:
            written.append(table.to_csv(cfg.out_dir / f"convergence_{rule.value}.csv"))
    return f"integrate: {len(written)} convergence table(s) in {cfg.out_dir}"


def _driven(model, scheme, driver):
    result = simulate_driven(model, scheme, driver)
    if result.terminated_early:
        raise NumericalError(f"simulated path left the domain at t={result.end_time}")
    return result.path


def cmd_convert(cfg):
    """Drift of the model and of its Ito form, sampled on a grid."""
    model = cfg.model()
    block = cfg.block("convert")
    span = block.get("range", [None, None])
    if not isinstance(span, list) or len(span) != 2:
        raise ConfigError("'convert.range' must be a list [lo, hi]")
    lo = model.lo if span[0] is None else number({"lo": span[0]}, "lo", "convert.range")
    hi = model.hi if span[1] is None else number({"hi": span[1]}, "hi", "convert.range")
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("the model domain is unbounded; give 'convert.range'")
    samples = number(block, "samples", "convert", default=101, integer=True)
    if samples < 1 or not lo <= hi:
        raise ConfigError(f"empty domain sample: {samples} point(s) on [{lo}, {hi}]")
    xs = np.linspace(lo, hi, samples)
    f_original = np.broadcast_to(model.f(xs), xs.shape)
    f_ito = np.broadcast_to(to_ito(model).f(xs), xs.shape)
    target = cfg.out_dir / "converted_drift.csv"
    write_csv(target, ["x", "f_original", "f_ito"],
              ([float(x), float(a), float(b)] for x, a, b in zip(xs, f_original, f_ito)))
    return f"convert: {model.interpretation.value} drift and its Ito form at {samples} point(s) in {target}"


def cmd_simulate(cfg):
    model = cfg.model()
    scheme = cfg.scheme(model)
    mc = cfg.mc_config(model)
    result = simulate_ensemble(model, scheme, mc)
    summary = result.summary
    hitting = cfg.hitting()
    if hitting is not None:
        summary.hitting = hitting_time(model, scheme, hitting[0], hitting[1], mc)
    write_json(cfg.out_dir / "summary.json", summary.to_dict())
    summary.write_histogram(cfg.out_dir / "histogram.csv")
    dump = cfg.run_value("dump_paths", integer=True) or 0
    for i, p in enumerate(result.paths[:dump]):
        write_path_csv(p.path, cfg.out_dir / "paths" / f"path_{i:05d}.csv")
    mean = summary.terminal_mean
    return (
        f"simulate: {summary.n_paths} paths, terminal mean "
        f"{'n/a' if mean is None else f'{mean:.6g}'}, {summary.violations} violation(s)"
    )


def _interval(block, where, model):
    a = number(block, "a", where, default=model.lo if math.isfinite(model.lo) else None)
    b = number(block, "b", where, default=model.hi if math.isfinite(model.hi) else None)
    n_cells = number(block, "n_cells", where, default=256, positive=True, integer=True)
    if not a < b:
        raise ConfigError(f"'{where}' interval [{a}, {b}] is empty")
    return a, b, n_cells


def _write_density(cfg, density, name):
    if cfg.format == "json":
        return write_json(cfg.out_dir / f"{name}.json", {
            "a": density.a,
            "b": density.b,
            "x_center": density.centers.tolist(),
            "density": density.values.tolist(),
        })
    return density.to_csv(cfg.out_dir / f"{name}.csv")


def cmd_stationary(cfg):
    model = cfg.model()
    a, b, n_cells = _interval(cfg.block("stationary"), "stationary", model)
    p = stationary_density(model.drift, model.diffusion, a, b, n_cells, model.interpretation, dgdx=model.dgdx)
    _write_density(cfg, p, "density")
    modes = [c.x for c in critical_points(p) if c.kind is CriticalKind.MAX]
    return f"stationary: density on [{a}, {b}] with {n_cells} cells, {len(modes)} mode(s)"


def cmd_fpe(cfg):
    model = cfg.model()
    block = cfg.block("fpe")
    a, b, n_cells = _interval(block, "fpe", model)
    x0 = number(block, "x0", "fpe", default=min(max(model.x0, a), b))
    problem = FpeProblem(model.drift, model.diffusion, a, b, x0, n_cells, model.interpretation,
                         gdgdx=model.noise_drift)
    T = number(block, "T", "fpe", default=1.0, positive=True)
    dt = cfg.overrides.get("dt")
    if dt is None:
        dt = number(block, "dt", "fpe", default=0.9 * admissible_dt(problem), positive=True)
    snapshots = number(block, "snapshots", "fpe", default=11, positive=True, integer=True)
    result = evolve_fpe(problem, float(dt), T, n_snapshots=snapshots)
    _write_density(cfg, result.final, "density_final")
    _write_density(cfg, result.equilibrium, "density_equilibrium")
    result.write_entropy_csv(cfg.out_dir / "entropy.csv")
    trace = result.entropy_trace()
    write_json(cfg.out_dir / "fpe_summary.json", {
        "a": a,
        "b": b,
        "n_cells": n_cells,
        "T": T,
        "dt": result.dt,
        "dt_bound": result.dt_bound,
        "n_steps": result.n_steps,
        "mass": result.final.mass,
        "entropy_final": json_number(trace[-1][1]),
    })
    return f"fpe: {result.n_steps} steps of {result.dt:.3g} to T={T}, final relative entropy {trace[-1][1]:.3e}"


def experiment_settings(name, cfg):
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{name}', choose from {', '.join(EXPERIMENTS)}")
    preset = dict(EXPERIMENTS[name])
    block = cfg.block("experiment")
    for key, default in preset.items():
        if key == "family":
            continue
        integer = key in ("n_seeds", "hitting_paths")
        preset[key] = number(block, key, "experiment", default=default, integer=integer)
    for key in block:
        if key not in preset:
            raise ConfigError(f"'experiment.{key}' does not apply to {name}")
    if cfg.overrides.get("paths") is not None:
        preset["n_seeds"] = preset["hitting_paths"] = int(cfg.overrides["paths"])
    if cfg.overrides.get("dt") is not None:
        preset["dt"] = preset["hitting_dt"] = float(cfg.overrides["dt"])
    return preset


def cmd_experiment(cfg, name):
    """Rest-start diagnostics and hitting times of one builtin family, all three interpretations."""
    preset = experiment_settings(name, cfg)
    model_block = cfg.block("model")
    family = model_block.get("family", name)
    if family != name:
        raise ConfigError(f"experiment {name} cannot run model family {family!r}")
    params = model_block.get("params", {})
    langevin = langevin_params(params) if name != "relativistic" else None
    relativistic = relativistic_params(params) if name == "relativistic" else None
    trio = trio_for(name, langevin, relativistic)
    seed = cfg.seed
    threads = cfg.block("run").get("threads")

    # rest starts sit on the domain floor
    floor = trio.ito.lo
    rest_trio = ModelTrio(trio.family, *(replace(m, x0=floor) for m in trio.members()))
    rest = rest_start_diagnostics(rest_trio, preset["dt"], preset["n_seeds"], preset["horizon"],
                                  seed.child(0), threads)

    start = preset["energy0"] if name == "relativistic" else preset["k0"]
    if not start > floor:
        raise ConfigError(f"hitting study must start above the floor {floor}, got {start}")
    hit_cfg = McConfig(preset["hitting_paths"], preset["hitting_dt"], preset["hitting_horizon"],
                       seed.child(1), threads=threads)
    hits = hitting_study(trio, floor, preset["eps"], hit_cfg, start=start)

    results = []
    for interpretation in Interpretation:
        row = rest[interpretation].to_dict()
        row["hitting"] = hits[interpretation].to_dict()
        results.append(row)
    report = {
        "experiment": name,
        "model_family": trio.family,
        "seed": seed.master,
        "settings": {k: v for k, v in preset.items() if k != "family"},
        "floor": floor,
        "start": start,
        "results": results,
    }
    target = write_json(cfg.out_dir / f"experiment_{name}.json", report)
    hk = rest[Interpretation.HK]
    return (
        f"experiment {name}: Ito interior {rest[Interpretation.ITO].interior_fraction:.3f}, "
        f"HK violations {hk.violation_fraction:.3f}; report in {target}"
    )


COMMANDS = {
    "integrate": cmd_integrate,
    "convert": cmd_convert,
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
    "fpe": cmd_fpe,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="noisecalc", description="Ito, Stratonovich and HK noise calculus lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["experiment"]:
        p = sub.add_parser(name)
        if name == "experiment":
            p.add_argument("name", choices=sorted(EXPERIMENTS))
            p.add_argument("--config", help="RunConfig JSON file")
        else:
            p.add_argument("--config", required=True, help="RunConfig JSON file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--paths", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--format", choices=["csv", "json"])
    return parser


def _overrides(args):
    if args.paths is not None and args.paths < 1:
        raise ConfigError(f"--paths must be >= 1, got {args.paths}")
    if args.dt is not None and not args.dt > 0:
        raise ConfigError(f"--dt must be positive, got {args.dt}")
    if args.seed is not None and args.seed < 0:
        raise ConfigError(f"--seed must be non-negative, got {args.seed}")
    return {"seed": args.seed, "out": args.out, "paths": args.paths, "dt": args.dt, "format": args.format}


def run(args):
    overrides = _overrides(args)
    if args.config:
        cfg = RunConfig.load(args.config, overrides)
    else:
        cfg = RunConfig({}, overrides=overrides)
    if args.command == "experiment":
        return cmd_experiment(cfg, args.name)
    return COMMANDS[args.command](cfg)


def main(argv=None):
    """Parse argv, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        line = run(args)
    except (ExprEvaluationError, NumericalError, ArithmeticError) as e:
        logger.error(f"Numerical failure in {args.command}: {e}")
        return EXIT_NUMERIC
    except (ConfigError, ExprError, InvalidInputError) as e:
        logger.error(f"Invalid configuration for {args.command}: {e}")
        return EXIT_CONFIG
    except NoiseCalcError as e:
        logger.error(f"Error in {args.command}: {e}")
        return EXIT_UNEXPECTED
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}")
        logger.error(traceback.format_exc())
        return EXIT_UNEXPECTED
    print(line, file=sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
