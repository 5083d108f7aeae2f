"""Run configuration: loading, schema validation and merging.

A config file is YAML or JSON.  Top-level keys apply to every command; a
mapping named after a command (``expand``, ``simulate`` ...) overrides them
for that command only.  A run manifest is also a valid config file: its
``config`` block is read back verbatim.

Validation errors carry the file position of the offending key, e.g.
``run.yaml:7:3: lattice.nt: expected an integer >= 8, got 4``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
import yaml

from .numerics.lattice import LatticeSpec

COMMANDS = ("expand", "expect", "correlate", "analyze", "simulate", "verify")
EXTENSIONS = ("epsilon_cut", "epsilon_cut_logsub")
SIMULATE_MODES = ("linear", "first_order", "scaling", "decay")


class ConfigError(ValueError):
    """Invalid configuration; ``messages`` holds one diagnostic per problem."""

    def __init__(self, messages):
        self.messages = list(messages) if not isinstance(messages, str) else [messages]
        super().__init__("\n".join(self.messages))


# -- value checkers: return an error string or None


def _int(lo=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            return f"expected an integer, got {v!r}"
        if lo is not None and v < lo:
            return f"expected an integer >= {lo}, got {v}"
    return check


def _num(lo=None, strict=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return f"expected a number, got {v!r}"
        if lo is not None and (v <= lo if strict else v < lo):
            return f"expected a number {'>' if strict else '>='} {lo}, got {v}"
    return check


def _opt(check):
    return lambda v: None if v is None else check(v)


def _choice(options):
    def check(v):
        if v not in options:
            return f"expected one of {', '.join(options)}, got {v!r}"
    return check


def _str(v):
    if not isinstance(v, str) or not v:
        return f"expected a non-empty string, got {v!r}"


def _list_of(options):
    def check(v):
        if not isinstance(v, list):
            return f"expected a list, got {v!r}"
        bad = [x for x in v if x not in options]
        if bad:
            return f"unknown entries {bad}; allowed: {', '.join(options)}"
    return check


CHI_SCHEMA = {
    "center_t": _num(), "center_x": _num(), "radius_t": _num(0, True), "radius_x": _num(0, True),
    "plateau": _num(0), "height": _num(0),
}
LATTICE_SCHEMA = {
    "d": _int(1), "T": _num(0, True), "Lx": _num(0, True), "nt": _int(8), "nx": _int(8),
    "epsilon": _opt(_num(0, True)), "sign_convention": _choice(("plus", "minus")), "chi": CHI_SCHEMA,
}
COMMON_SCHEMA = {
    "kappa": _int(1), "order": _int(0), "dim": _num(0, True), "lambda": _num(0), "n_real": _int(100),
    "seed": _int(0), "extension": _choice(EXTENSIONS), "out": _str, "lattice": LATTICE_SCHEMA,
    "k_max": _int(1), "dot_max": _int(0), "points": _int(1), "modes": _list_of(SIMULATE_MODES),
    "criteria": None,  # checked against the acceptance registry at run time
}
CONFIG_SCHEMA = dict(COMMON_SCHEMA, **{c: COMMON_SCHEMA for c in COMMANDS})


@dataclass
class RunConfig:
    kappa: int = 1
    order: int = 1
    dim: float = 1
    lam: float = 0.05
    n_real: int = 10_000
    seed: int = 0
    extension: str = "epsilon_cut"
    out: str = "results"
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    k_max: int = 8
    dot_max: int = 3
    points: int = 2
    modes: list = field(default_factory=lambda: ["linear"])
    criteria: list | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["lattice"] = self.lattice.to_dict()
        return d


# -- loading with positions


def _positions(node, path=(), out=None) -> dict:
    """``{key path: (line, column)}`` (1-based) for every mapping key."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (str(k.value),)
            out[p] = (k.start_mark.line + 1, k.start_mark.column + 1)
            _positions(v, p, out)
    return out


def load_document(path: str | Path) -> tuple:
    """Parse a YAML/JSON file; returns ``(data, positions)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})")
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError(f"{where}: syntax error: {exc.problem}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: top level must be a mapping")
    positions = _positions(node) if node is not None else {}
    # run manifests carry the resolved configuration under "config"
    if "config" in data and "command" in data:
        positions = {k[1:]: v for k, v in positions.items() if k[:1] == ("config",)}
        data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: manifest config block must be a mapping")
    return data, positions


def validate(data: dict, positions: dict | None = None, source: str = "<config>") -> None:
    positions = positions or {}
    errors = []

    def where(path):
        line_col = positions.get(path)
        return f"{source}:{line_col[0]}:{line_col[1]}" if line_col else source

    def walk(obj, schema, path):
        if not isinstance(obj, dict):
            errors.append(f"{where(path)}: {'.'.join(path)}: expected a mapping, got {obj!r}")
            return
        for key, value in obj.items():
            p = path + (str(key),)
            if key not in schema:
                errors.append(f"{where(p)}: {'.'.join(p)}: unknown key")
                continue
            rule = schema[key]
            if isinstance(rule, dict):
                walk(value, rule, p)
            elif rule is not None:
                msg = rule(value)
                if msg:
                    errors.append(f"{where(p)}: {'.'.join(p)}: {msg}")

    walk(data, CONFIG_SCHEMA, ())
    if errors:
        raise ConfigError(errors)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve(command: str, data: dict | None = None, overrides: dict | None = None,
            source: str = "<config>", positions: dict | None = None) -> RunConfig:
    """Defaults, then top-level keys, then the command section, then flag overrides."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    data = data or {}
    validate(data, positions, source)
    merged = {k: v for k, v in data.items() if k not in COMMANDS}
    merged = _merge(merged, data.get(command) or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    validate(overrides, None, "<command line>")
    merged = _merge(merged, overrides)
    cfg = RunConfig()
    lattice = merged.pop("lattice", None)
    for key, value in merged.items():
        setattr(cfg, "lam" if key == "lambda" else key, value)
    if lattice:
        try:
            cfg.lattice = LatticeSpec.from_dict(_merge(cfg.lattice.to_dict(), lattice))
        except (TypeError, ValueError) as exc:
            line = positions.get(("lattice",)) if positions else None
            where = f"{source}:{line[0]}:{line[1]}" if line else source
            raise ConfigError(f"{where}: lattice: {exc}")
    return cfg


def load_config(command: str, path: str | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return resolve(command, {}, overrides)
    data, positions = load_document(path)
    return resolve(command, data, overrides, str(path), positions)


def config_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


__all__ = [
    "COMMANDS", "ConfigError", "RunConfig", "config_json", "load_config", "load_document",
    "resolve", "validate",
]
