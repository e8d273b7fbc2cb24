"""Run configuration: strict ``key = value`` files, command-line overrides and
per-command defaults."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

COMMANDS = ("hom", "relax", "ruusc", "converge", "gamma", "example2d")

# resource caps; exceeding one is a configuration error
MAX_CELLS_1D = 4096
MAX_CELLS_2D = 256
MAX_LEVEL = 8
MAX_SAMPLES = 1_000_000


class ConfigError(ValueError):
    """Malformed or invalid configuration (exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    """Fields left at ``None`` take the defaults of the chosen command."""

    command: str
    density: Optional[str] = None
    xi: Optional[str] = None
    k: Optional[tuple] = None
    n: Optional[tuple] = None
    t: Optional[tuple] = None
    eps: Optional[tuple] = None
    level: Optional[tuple] = None
    operator: str = "W"
    a: float = 1.0
    slack: float = 0.05
    starts: int = 4
    max_iters: int = 500
    seed: int = 0
    samples: Optional[int] = None
    out: str = "cellhom_out"
    strict: bool = False
    suite: bool = False

    def as_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v) for f, v in ((f, getattr(self, f.name)) for f in fields(self))}


DEFAULTS = {
    "hom": dict(density="conv_quad", xi="1", k=(1,), n=(16,)),
    "relax": dict(density="double_well_1d", xi="0", level=(3,)),
    "ruusc": dict(density="abs_box_1d", t=(0.9, 0.99, 0.999), samples=256),
    "converge": dict(density="twophase1d", xi="1", eps=(0.5, 0.25, 0.125), k=(1, 2, 3), n=(32,)),
    "gamma": dict(density="twophase1d", xi="1", t=(0.9, 0.99, 0.995, 0.999), n=(8, 16, 32, 32),
                  level=(2, 3, 4, 4), eps=(0.25, 0.125, 0.0625, 0.03125)),
    "example2d": dict(density="hyper2d_default", xi="0 0 0 0", t=(0.9, 0.99, 0.999), samples=10_000),
}

_INT_LISTS = ("k", "n", "level")
_FLOAT_LISTS = ("t", "eps")
_INTS = ("starts", "max_iters", "seed", "samples")
_BOOLS = ("strict", "suite")
KEYS = tuple(f.name for f in fields(RunConfig))


def _parse_list(text: str, kind, key: str) -> tuple:
    try:
        vals = [kind(float(s)) if kind is float else _int(s, key) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None
    if not vals:
        raise ConfigError(f"{key}: empty list")
    return tuple(vals)


def _int(s: str, key: str) -> int:
    v = float(s)
    if not v.is_integer():
        raise ConfigError(f"{key}: {s!r} is not an integer")
    return int(v)


def _parse_bool(text: str, key: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def coerce(key: str, value):
    """Typed value for ``key`` from a string (or an already typed value)."""
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    if value is None:
        return None
    if key in _INT_LISTS:
        return _parse_list(value, int, key) if isinstance(value, str) else tuple(int(v) for v in value)
    if key in _FLOAT_LISTS:
        return _parse_list(value, float, key) if isinstance(value, str) else tuple(float(v) for v in value)
    if key in _INTS:
        try:
            return _int(str(value), key)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    if key in _BOOLS:
        return value if isinstance(value, bool) else _parse_bool(value, key)
    if key in ("a", "slack"):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return str(value).strip()


def parse_config_text(text: str) -> dict:
    """Strict line parser: ``key = value``, ``#`` comments, no duplicates."""
    out, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        seen[key] = lineno
        try:
            out[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    """Read a config file, apply non-``None`` overrides and validate."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    values = parse_config_text(p.read_text())
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "command" not in values:
        raise ConfigError("config must set 'command'")
    return resolve(RunConfig(**values))


def parse_xi(text: str, m: int, d: int) -> np.ndarray:
    """Matrices separated by ``,`` with entries separated by spaces (row-major)."""
    mats = []
    for chunk in str(text).split(","):
        if not chunk.strip():
            continue
        try:
            entries = [float(s) for s in chunk.split()]
        except ValueError:
            raise ConfigError(f"xi: cannot parse {chunk!r}") from None
        if len(entries) != m * d:
            raise ConfigError(f"xi: expected {m * d} entries per matrix, got {len(entries)}")
        if not all(math.isfinite(e) for e in entries):
            raise ConfigError("xi entries must be finite")
        mats.append(np.array(entries).reshape(m, d))
    if not mats:
        raise ConfigError("xi: empty list")
    return np.array(mats)


def resolve(cfg: RunConfig) -> RunConfig:
    """Fill command defaults and check invariants and caps."""
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {list(COMMANDS)}")
    fill = {k: v for k, v in DEFAULTS[cfg.command].items() if getattr(cfg, k) is None}
    cfg = replace(cfg, **fill)
    for key in ("k", "n", "level", "t", "eps"):
        v = getattr(cfg, key)
        if v is not None and len(v) == 0:
            raise ConfigError(f"{key} schedule must be nonempty")
    if cfg.k and min(cfg.k) < 1:
        raise ConfigError("k entries must be >= 1")
    if cfg.n and min(cfg.n) < 1:
        raise ConfigError("n entries must be >= 1")
    if cfg.level and not 0 <= min(cfg.level) <= max(cfg.level) <= MAX_LEVEL:
        raise ConfigError(f"level entries must lie in [0, {MAX_LEVEL}]")
    if cfg.t and not all(0 < t <= 1 for t in cfg.t):
        raise ConfigError("t entries must lie in (0, 1]")
    if cfg.eps and min(cfg.eps) <= 0:
        raise ConfigError("eps entries must be positive")
    if cfg.starts < 1 or cfg.max_iters < 1:
        raise ConfigError("starts and max_iters must be >= 1")
    if cfg.samples is not None and not 1 <= cfg.samples <= MAX_SAMPLES:
        raise ConfigError(f"samples must lie in [1, {MAX_SAMPLES}]")
    if cfg.operator not in ("W", "HW"):
        raise ConfigError("operator must be 'W' or 'HW'")
    if cfg.a < 0 or cfg.slack < 0:
        raise ConfigError("a and slack must be nonnegative")
    if cfg.command == "gamma":
        lens = {len(cfg.t), len(cfg.n), len(cfg.level), len(cfg.eps)}
        if len(lens) != 1:
            raise ConfigError("gamma schedules t, n, level, eps must have equal lengths")
    return cfg


def check_caps(cfg: RunConfig, d: int) -> None:
    """Cells per axis (``k*n``) against the dimension-dependent cap."""
    cap = MAX_CELLS_1D if d == 1 else MAX_CELLS_2D
    ks = cfg.k or (1,)
    ns = cfg.n or (16,)
    if max(ks) * max(ns) > cap:
        raise ConfigError(f"schedule cap exceeded: k*n = {max(ks) * max(ns)} > {cap} cells per axis in {d}D")
    if cfg.command == "converge" and cfg.eps:
        if max(ns) / min(cfg.eps) > cap:
            raise ConfigError(f"schedule cap exceeded: n/eps = {max(ns) / min(cfg.eps):g} > {cap}")


def config_echo(cfg: RunConfig) -> dict:
    return cfg.as_dict()


__all__ = [
    "COMMANDS",
    "ConfigError",
    "DEFAULTS",
    "KEYS",
    "RunConfig",
    "check_caps",
    "coerce",
    "config_echo",
    "load_config",
    "parse_config_text",
    "parse_xi",
    "resolve",
]
