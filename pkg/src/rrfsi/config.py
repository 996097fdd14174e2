"""Run configuration: parsing, defaults and validation."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields

import yaml

MODES = ("converge", "stability", "run", "ale-demo", "mesh-info")
PROBLEMS = ("manufactured", "stability")

DEFAULT_DT_SWEEP = (0.1 / 4, 0.1 / 8, 0.1 / 16, 0.1 / 32, 0.1 / 64)
EXTENDED_DT_SWEEP = DEFAULT_DT_SWEEP + (0.1 / 128,)

# mode-specific overrides applied when the key is absent from the document
_MODE_DEFAULTS = {
    "converge": {"T": 0.5, "nx": 32, "ny": 32},
}

MANUFACTURED_PRESET = dict(rho_f=1.0, mu_f=1.0, rho_s=1.0, mu_s=1.0, lambda_s=1.0,
                           fluid_rect=(0.0, 1.0, 0.0, 1.0), structure_rect=(0.0, 1.0, -1.0, 0.0))


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    mode: str
    fluid_rect: tuple = (0.0, 1.0, 0.0, 1.0)
    structure_rect: tuple = (0.0, 1.0, -1.0, 0.0)
    nx: int = 16
    ny: int = 16
    dt: float = 0.01
    T: float = 1.0
    L1: float = 1.0
    L2: float = 1.0
    rho_f: float = 1.0
    mu_f: float = 1.0
    rho_s: float = 1.0
    mu_s: float = 1.0
    lambda_s: float = 1.0
    out: str = "out"
    seed: int = 0
    dump_fields: bool = False
    dump_interval: int = 1
    problem: str = "manufactured"
    dt_sweep: tuple = DEFAULT_DT_SWEEP
    L_values: tuple = (1.0, 50.0, 500.0)
    amplitude: float = 1.0
    parallel: bool = True
    displacement: str = "0, 0.1*sin(pi*x)"
    refine: tuple = ()
    plot: bool = False

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def replace(self, **changes) -> "RunConfig":
        return validate(dataclasses.replace(self, **changes))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
_POSITIVE = ("dt", "L1", "L2", "rho_f", "mu_f", "rho_s", "mu_s", "lambda_s", "amplitude")
_INTS = ("nx", "ny", "seed", "dump_interval")
_BOOLS = ("dump_fields", "parallel", "plot")


def _number(key, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(key, f"must be finite, got {v}")
    return v


def _integer(key, v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return int(v)


def _rect(key, v) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 4:
        raise ConfigError(key, "expected [x0, x1, y0, y1]")
    x0, x1, y0, y1 = (_number(key, c) for c in v)
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(key, f"degenerate rectangle {v}")
    return (x0, x1, y0, y1)


def validate(cfg: RunConfig) -> RunConfig:
    """Type coercion and range checks; returns a normalised copy."""
    c = cfg.as_dict()
    if c["mode"] not in MODES:
        raise ConfigError("mode", f"expected one of {', '.join(MODES)}, got {c['mode']!r}")
    if c["problem"] not in PROBLEMS:
        raise ConfigError("problem", f"expected one of {', '.join(PROBLEMS)}, got {c['problem']!r}")
    for k in _POSITIVE:
        c[k] = _number(k, c[k])
        if not c[k] > 0:
            raise ConfigError(k, f"must be positive, got {c[k]}")
    c["T"] = _number("T", c["T"])
    if c["T"] < 0:
        raise ConfigError("T", f"must be nonnegative, got {c['T']}")
    for k in _INTS:
        c[k] = _integer(k, c[k])
    for k in ("nx", "ny", "dump_interval"):
        if c[k] < 1:
            raise ConfigError(k, f"must be at least 1, got {c[k]}")
    for k in _BOOLS:
        if not isinstance(c[k], bool):
            raise ConfigError(k, f"expected true or false, got {c[k]!r}")
    if c["T"] > 0 and c["dt"] > c["T"]:
        raise ConfigError("dt", f"dt={c['dt']} exceeds T={c['T']}")
    if c["T"] > 0 and abs(round(c["T"] / c["dt"]) * c["dt"] - c["T"]) > 1e-9 * c["T"]:
        raise ConfigError("T", f"T={c['T']} is not an integer multiple of dt={c['dt']}")
    for k in ("fluid_rect", "structure_rect"):
        c[k] = _rect(k, c[k])
    for k in ("dt_sweep", "L_values"):
        seq = c[k]
        if isinstance(seq, str):
            seq = parse_list(k, seq)
        if not isinstance(seq, (list, tuple)) or not seq:
            raise ConfigError(k, "expected a non-empty list of numbers")
        seq = tuple(_number(k, v) for v in seq)
        if any(v <= 0 for v in seq):
            raise ConfigError(k, "entries must be positive")
        c[k] = seq
    if any(b > a for a, b in zip(c["dt_sweep"], c["dt_sweep"][1:])):
        raise ConfigError("dt_sweep", "entries must be non-increasing")
    if not isinstance(c["refine"], (list, tuple)):
        raise ConfigError("refine", "expected a list of element indices")
    c["refine"] = tuple(_integer("refine", v) for v in c["refine"])
    if not isinstance(c["displacement"], str):
        raise ConfigError("displacement", "expected an expression string 'ux, uy'")
    c["out"] = str(c["out"])
    return RunConfig(**c)


def parse_list(key: str, text: str) -> tuple:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {text!r} as a comma-separated list") from exc


def from_mapping(doc: dict, overrides: dict | None = None) -> RunConfig:
    """Config from a key-value mapping; ``overrides`` (e.g. CLI flags) win."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "expected a mapping at top level")
    merged = dict(doc)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(merged) - set(FIELD_NAMES) - {"preset"})
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if "mode" not in merged:
        raise ConfigError("mode", "missing required key")
    preset = merged.pop("preset", None)
    values = {}
    if preset is not None:
        if preset != "manufactured":
            raise ConfigError("preset", f"unknown preset {preset!r}")
        values.update(MANUFACTURED_PRESET)
    values.update(_MODE_DEFAULTS.get(merged["mode"], {}))
    values.update(merged)
    return validate(RunConfig(**values))


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """YAML or JSON document to a validated :class:`RunConfig`."""
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"malformed document: {exc}") from exc
    return from_mapping(doc, overrides)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.as_dict(), indent=2, sort_keys=True)


def defaults_help() -> str:
    base = RunConfig(mode="stability")
    parts = [f"{k}={getattr(base, k)}" for k in ("nx", "ny", "dt", "T", "L1", "L2", "seed")]
    return ("defaults: " + ", ".join(parts) + "; unit densities and elastic moduli; "
            "converge uses T=0.5 and nx=ny=32 unless set")
