"""
RunConfig: the JSON file every command reads.

Blocks and keys are checked before anything runs; unknown keys are
errors. Formulas are written in the expression language of modules.expr
with x as the state and t as time. Infinite domain ends are written as
null.
"""

import json
import math
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from modules.expr import UnsupportedDerivativeError, parse
from modules.paths import SeedSpec
from modules.physics import LangevinParams, RelativisticParams, trio_for
from modules.sde import Interpretation, SdeModel
from modules.solvers import Boundary, McConfig, SolverScheme
from modules.utils.config import settings
from modules.utils.errors import ConfigError

logger = logging.getLogger("noisecalc.cli")

FAMILIES = ("langevin1", "langevin2", "relativistic", "custom")

SCHEMA = {
    "model": {"family", "interpretation", "params", "f", "g", "domain", "x0"},
    "run": {"n_paths", "dt", "horizon", "seed", "boundary", "scheme", "threads", "hitting", "dump_paths"},
    "outputs": {"dir", "format"},
    "integrate": {"phi", "process", "t0", "t1", "n_steps", "levels", "rules"},
    "convert": {"range", "samples"},
    "stationary": {"a", "b", "n_cells"},
    "fpe": {"a", "b", "n_cells", "dt", "T", "x0", "snapshots"},
    "experiment": {"k0", "energy0", "eps", "n_seeds", "dt", "horizon", "hitting_paths", "hitting_dt", "hitting_horizon"},
}
PARAM_KEYS = {"m", "gamma", "sigma", "v0", "u0", "M", "alpha", "noise", "p0", "energy0"}
BOUNDARY_KEYS = {"kind", "lo", "hi"}
HITTING_KEYS = {"level", "eps"}

RUN_DEFAULTS = {
    "n_paths": 1000,
    "dt": 1e-3,
    "horizon": 1.0,
    "seed": 0,
    "threads": None,
    "dump_paths": 0,
}

# Builtin experiments; every field can be overridden in the "experiment" block
EXPERIMENTS = {
    "langevin1": {
        "family": "langevin1",
        "k0": 0.5,
        "eps": 1e-4,
        "n_seeds": 1000,
        "dt": 1e-3,
        "horizon": 1.0,
        "hitting_paths": 1000,
        "hitting_dt": 1e-3,
        "hitting_horizon": 20.0,
    },
    "langevin2": {
        "family": "langevin2",
        "k0": 0.5,
        "eps": 1e-6,
        "n_seeds": 1000,
        "dt": 1e-3,
        "horizon": 1.0,
        "hitting_paths": 1000,
        "hitting_dt": 1e-2,
        "hitting_horizon": 20.0,
    },
    "relativistic": {
        "family": "relativistic",
        "energy0": 2.0,
        "eps": 1e-4,
        "n_seeds": 1000,
        "dt": 1e-3,
        "horizon": 1.0,
        "hitting_paths": 1000,
        "hitting_dt": 1e-3,
        "hitting_horizon": 20.0,
    },
}


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"'{where}' must be an object")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {', '.join(unknown)}")


def number(block, key, where, default=None, positive=False, integer=False):
    value = block.get(key, default)
    if value is None:
        if default is None and key not in block:
            raise ConfigError(f"missing '{where}.{key}'")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}.{key}' must be a number, got {value!r}")
    if integer and float(value) != int(value):
        raise ConfigError(f"'{where}.{key}' must be an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"'{where}.{key}' must be positive, got {value!r}")
    return int(value) if integer else float(value)


def text(block, key, where, default=None):
    value = block.get(key, default)
    if value is None:
        raise ConfigError(f"missing '{where}.{key}'")
    if not isinstance(value, str):
        raise ConfigError(f"'{where}.{key}' must be a string, got {value!r}")
    return value


def _bound(value, fallback, where):
    if value is None:
        return fallback
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}' must be a number or null, got {value!r}")
    return float(value)


@dataclass
class RunConfig:
    raw: dict
    source: str = "<inline>"
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_keys(self.raw, SCHEMA, "config")
        for name, block in self.raw.items():
            _check_keys(block, SCHEMA[name], name)

    @classmethod
    def load(cls, path, overrides=None):
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
        return cls(raw, str(path), overrides or {})

    def block(self, name):
        return self.raw.get(name, {})

    @property
    def seed(self):
        if self.overrides.get("seed") is not None:
            return SeedSpec(int(self.overrides["seed"]))
        value = number(self.block("run"), "seed", "run", default=RUN_DEFAULTS["seed"], integer=True)
        if value < 0:
            raise ConfigError(f"'run.seed' must be non-negative, got {value}")
        return SeedSpec(value)

    @property
    def out_dir(self):
        if self.overrides.get("out"):
            return Path(self.overrides["out"])
        return Path(self.block("outputs").get("dir") or settings["out_dir"])

    @property
    def format(self):
        fmt = self.overrides.get("format") or self.block("outputs").get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {fmt!r}")
        return fmt

    def run_value(self, key, positive=False, integer=False):
        override = {"n_paths": "paths", "dt": "dt"}.get(key)
        if override and self.overrides.get(override) is not None:
            value = self.overrides[override]
            return int(value) if integer else float(value)
        return number(self.block("run"), key, "run", default=RUN_DEFAULTS.get(key), positive=positive, integer=integer)

    def boundary(self, model):
        spec = self.block("run").get("boundary")
        if spec is None:
            return Boundary.none()
        if isinstance(spec, str):
            spec = {"kind": spec}
        _check_keys(spec, BOUNDARY_KEYS, "run.boundary")
        kind = text(spec, "kind", "run.boundary")
        if kind not in ("none", "stop", "reflect"):
            raise ConfigError(f"'run.boundary.kind' must be none, stop or reflect, got {kind!r}")
        if kind != "reflect":
            return Boundary(kind)
        lo = _bound(spec.get("lo"), model.lo if "lo" not in spec else -math.inf, "run.boundary.lo")
        hi = _bound(spec.get("hi"), model.hi if "hi" not in spec else math.inf, "run.boundary.hi")
        if not lo < hi:
            raise ConfigError(f"reflecting interval [{lo}, {hi}] is empty")
        return Boundary.reflect(lo, hi)

    def mc_config(self, model):
        threads = self.block("run").get("threads")
        if threads is not None and (isinstance(threads, bool) or not isinstance(threads, int) or threads < 0):
            raise ConfigError(f"'run.threads' must be a non-negative integer, got {threads!r}")
        return McConfig(
            n_paths=self.run_value("n_paths", positive=True, integer=True),
            dt=self.run_value("dt", positive=True),
            horizon=self.run_value("horizon", positive=True),
            seed=self.seed,
            boundary=self.boundary(model),
            threads=threads,
        )

    def scheme(self, model):
        name = self.block("run").get("scheme")
        if name is None:
            return SolverScheme.direct_for(model.interpretation)
        if not isinstance(name, str):
            raise ConfigError(f"'run.scheme' must be a string, got {name!r}")
        return SolverScheme.parse(name)

    def hitting(self):
        spec = self.block("run").get("hitting")
        if spec is None:
            return None
        _check_keys(spec, HITTING_KEYS, "run.hitting")
        return (
            number(spec, "level", "run.hitting"),
            number(spec, "eps", "run.hitting", positive=True),
        )

    def model(self):
        return build_model(self.block("model"))


def _formula(block, key, where):
    source = text(block, key, where)
    return parse(source)


def _interpretation(block, default="hk"):
    name = block.get("interpretation", default)
    try:
        return Interpretation.parse(name)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def langevin_params(params):
    try:
        return LangevinParams(
            m=number(params, "m", "model.params", default=1.0, positive=True),
            gamma=number(params, "gamma", "model.params", default=1.0, positive=True),
            sigma=number(params, "sigma", "model.params", default=1.0, positive=True),
            v0=number(params, "v0", "model.params", default=0.0),
            u0=params.get("u0"),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def relativistic_params(params):
    kwargs = {
        "M": number(params, "M", "model.params", default=1.0, positive=True),
        "p0": number(params, "p0", "model.params", default=0.0),
    }
    if params.get("energy0") is not None:
        kwargs["initial_energy"] = number(params, "energy0", "model.params")
    for key, dkey in (("alpha", None), ("noise", "dnoise")):
        if key in params:
            tree = _formula(params, key, "model.params")
            kwargs[key] = _energy_function(tree)
            if dkey:
                try:
                    kwargs[dkey] = _energy_function(tree.derivative("x"))
                except UnsupportedDerivativeError as e:
                    logger.warning(f"{e}; using finite differences for the derivative of {key}")
    try:
        return RelativisticParams(**kwargs)
    except ArithmeticError as e:
        raise ConfigError(str(e)) from None


def _energy_function(tree):
    return lambda e: tree.evaluate(e, 0.0)


def build_model(block):
    """SdeModel described by a 'model' block."""
    _check_keys(block, SCHEMA["model"], "model")
    family = block.get("family", "custom")
    if family not in FAMILIES:
        raise ConfigError(f"'model.family' must be one of {', '.join(FAMILIES)}, got {family!r}")
    params = block.get("params", {})
    _check_keys(params, PARAM_KEYS, "model.params")

    if family != "custom":
        for key in ("f", "g", "domain"):
            if key in block:
                raise ConfigError(f"'model.{key}' only applies to custom models")
        trio = trio_for(family, langevin_params(params), relativistic_params(params) if family == "relativistic" else None)
        model = trio[_interpretation(block, "ito")]
        if "x0" in block:
            model = replace(model, x0=number(block, "x0", "model"))
        return model

    f_tree = _formula(block, "f", "model")
    g_tree = _formula(block, "g", "model")
    domain = block.get("domain", [None, None])
    if not isinstance(domain, list) or len(domain) != 2:
        raise ConfigError("'model.domain' must be a list [lo, hi] with null for an infinite end")
    lo = _bound(domain[0], -math.inf, "model.domain[0]")
    hi = _bound(domain[1], math.inf, "model.domain[1]")
    try:
        dgdx = g_tree.derivative("x").as_function()
    except UnsupportedDerivativeError as e:
        logger.warning(f"{e}; falling back to finite differences for dg/dx")
        dgdx = None
    default_x0 = 0.0 if lo <= 0.0 <= hi else (lo if math.isfinite(lo) else hi)
    try:
        return SdeModel(
            f_tree.as_function(), g_tree.as_function(), _interpretation(block),
            domain=(lo, hi), x0=number(block, "x0", "model", default=default_x0), dgdx=dgdx,
            assumptions=f"f = {f_tree.to_source()}, g = {g_tree.to_source()}",
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
