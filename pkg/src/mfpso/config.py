"""Strict JSON configuration shared by every command.

A config document has up to five sections, every field optional::

    {"objective": {...}, "solver": {...}, "experiment": {...},
     "grid": {...}, "meanfield": {...}}

Unknown sections or keys are rejected. :func:`normalize` fills in every
default and returns the canonical form, which parses back to the same config.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

from .harness import CRITERIA, ExperimentSpec
from .meanfield import MFParams, PhaseGrid
from .swarm import MODES, ConfigError, SolverConfig

__all__ = ["Config", "SCHEMA", "parse", "load", "normalize", "with_overrides", "schema_markdown"]


def _f(default, doc):
    return ("float", default, doc)


def _i(default, doc):
    return ("int", default, doc)


# section -> field -> (type, default, description)
SCHEMA: dict[str, dict[str, tuple]] = {
    "objective": {
        "function": ("str|null", None, "benchmark name (ackley, griewank, rastrigin, rosenbrock, "
                                       "salomon, schwefel220, xsy_random, xsy4)"),
        "dim": _i(20, "problem dimension"),
        "shift": ("float|null", None, "move the minimizer to shift*(1,...,1)"),
        "domain": ("[float,float]|null", None, "search box per coordinate; null = classical domain"),
        "rescale": ("bool", False, "map the domain to [-1,1]^d with minimum value 0"),
    },
    "solver": {
        "mode": ("str", "sdpso_nomem", "one of " + ", ".join(MODES)),
        "m": _f(0.0, "inertia weight"),
        "gamma": ("float|null", None, "friction; null = 1 - m"),
        "lam": _f(1.0, "drift towards the consensus (memoryless mode)"),
        "sigma": _f(1.0 / math.sqrt(3.0), "noise strength (memoryless mode)"),
        "lam1": _f(0.0, "drift towards the local best"),
        "sigma1": _f(0.0, "noise strength towards the local best"),
        "lam2": _f(1.0, "drift towards the consensus (memory modes)"),
        "sigma2": _f(1.0 / math.sqrt(3.0), "noise strength towards the consensus (memory modes)"),
        "nu": _f(50.0, "local-best relaxation rate"),
        "alpha": _f(5.0e4, "consensus sharpness ('inf' for the arg-min)"),
        "beta": _f(3.0e3, "local-best switch sharpness ('inf' for the hard switch)"),
        "dt": _f(0.01, "time step"),
        "noise": ("str", "gaussian", "gaussian or uniform"),
        "c1": _f(2.0, "classic PSO local coefficient"),
        "c2": _f(2.0, "classic PSO global coefficient"),
        "clamp": ("bool", False, "clip classic PSO positions to the domain"),
    },
    "experiment": {
        "n_particles": _i(100, "swarm size"),
        "n_r": _i(500, "number of replicate runs"),
        "seed": _i(0, "master seed"),
        "delta_err": _f(0.25, "success radius in the max norm"),
        "delta_fun": _f(0.01, "success tolerance on the value"),
        "delta_stall": _f(1e-4, "stall threshold on consensus movement"),
        "n_stall": _i(200, "consecutive stalled iterations before stopping"),
        "n_max": _i(10_000, "iteration cap"),
        "success_criterion": ("str", "position_only", "one of " + ", ".join(CRITERIA)),
    },
    "grid": {
        "nx": _i(90, "x nodes"),
        "nv": _i(120, "v nodes"),
        "x_lo": _f(-3.0, "x lower bound"),
        "x_hi": _f(3.0, "x upper bound"),
        "v_lo": _f(-4.0, "v lower bound"),
        "v_hi": _f(4.0, "v upper bound"),
        "dt": _f(0.01, "time step"),
    },
    "meanfield": {
        "m": _f(0.5, "inertia weight"),
        "gamma": ("float|null", None, "friction; null = 1 - m"),
        "lam": _f(1.0, "drift towards the consensus"),
        "sigma": _f(1.0 / math.sqrt(3.0), "noise strength"),
        "alpha": _f(30.0, "consensus sharpness"),
        "lam1": _f(0.0, "local-best drift"),
        "sigma1": _f(0.0, "local-best noise"),
        "lam2": _f(1.0, "consensus drift (memory equation)"),
        "sigma2": _f(1.0 / math.sqrt(3.0), "consensus noise (memory equation)"),
        "nu": _f(0.5, "local-best relaxation rate"),
        "beta": _f(30.0, "local-best switch sharpness"),
        "flux": ("str", "chang_cooper", "velocity flux weighting: chang_cooper or central"),
        "limiter": ("bool", True, "minmod limiter in the y-advection"),
    },
}


def _coerce(section, key, kind, value):
    where = f"{section}.{key}"
    if value is None:
        if kind.endswith("|null"):
            return None
        raise ConfigError(f"{where} must not be null")
    base = kind.split("|")[0]
    if base == "float":
        if isinstance(value, str) and value.lower() in ("inf", "infinity"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return int(value)
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if base == "[float,float]":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{where} must be a two-element list")
        return [_coerce(section, key, "float", v) for v in value]
    raise AssertionError(kind)


@dataclass
class Config:
    """Parsed configuration: one plain dict per section with defaults filled."""

    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __getitem__(self, section):
        return self.sections[section]

    def solver(self) -> SolverConfig:
        try:
            return SolverConfig(**self.sections["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def experiment(self) -> ExperimentSpec:
        obj = self.sections["objective"]
        if obj["function"] is None:
            raise ConfigError("objective.function is required")
        domain = tuple(obj["domain"]) if obj["domain"] is not None else None
        try:
            return ExperimentSpec(function=obj["function"], dim=obj["dim"], shift=obj["shift"],
                                  domain=domain, rescale=obj["rescale"], solver=self.solver(),
                                  **self.sections["experiment"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def grid(self) -> PhaseGrid:
        try:
            return PhaseGrid(**self.sections["grid"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def meanfield(self) -> MFParams:
        try:
            return MFParams(**self.sections["meanfield"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def parse(doc) -> Config:
    """Validate a config mapping (or JSON text) and fill in defaults."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    sections = {}
    for section, spec in SCHEMA.items():
        given = doc.get(section, {}) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be an object")
        bad = set(given) - set(spec)
        if bad:
            raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(bad))}")
        sections[section] = {
            key: _coerce(section, key, kind, given.get(key, default))
            for key, (kind, default, _) in spec.items()
        }
    cfg = Config(sections)
    # surface value errors (e.g. bad mode) at parse time
    cfg.solver()
    cfg.grid()
    cfg.meanfield()
    return cfg


def load(path) -> Config:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse(text)


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def normalize(cfg: Config) -> dict:
    """Canonical document: every section and key present, sorted, JSON-safe."""
    return {
        section: {key: _jsonable(cfg.sections[section][key]) for key in sorted(SCHEMA[section])}
        for section in sorted(SCHEMA)
    }


def with_overrides(cfg: Config, section: str, **values) -> Config:
    """Return a copy with non-``None`` overrides applied (re-validated)."""
    doc = normalize(cfg)
    for key, value in values.items():
        if value is not None:
            doc[section][key] = value
    return parse(doc)


def schema_markdown() -> str:
    lines = ["# Configuration schema", "",
             "A config file is a JSON object with the sections below. Every key is optional; "
             "unknown sections or keys are errors. Floats accept the string \"inf\".", ""]
    for section, spec in SCHEMA.items():
        lines += [f"## `{section}`", "", "| key | type | default | meaning |", "|---|---|---|---|"]
        for key, (kind, default, doc) in spec.items():
            shown = json.dumps(_jsonable(default))
            lines.append(f"| `{key}` | {kind} | `{shown}` | {doc} |")
        lines.append("")
    return "\n".join(lines)


assert {f.name for f in fields(SolverConfig)} == set(SCHEMA["solver"])
assert {f.name for f in fields(MFParams)} == set(SCHEMA["meanfield"])
