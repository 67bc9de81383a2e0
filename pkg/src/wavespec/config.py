"""Run configuration: TOML loading, validation and saving."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from .errors import ConfigError
from .params import EPSILON_CAP, Params


@dataclass
class GridConfig:
    Lx: float | None = None  # None: choose from epsilon and beta
    Nx: int = 512
    Nz: int = 48


@dataclass
class KConfig:
    k_min: float = 0.0
    k_max: float = 3.0
    nk: int = 61
    spacing: str = "adaptive"  # or "uniform"


@dataclass
class Tolerances:
    newton_tol: float = 1e-10
    re_tol: float = 1e-6  # relative to the spectral radius of J L(k)
    sym_tol: float = 1e-9  # relative to the spectral radius of L(k)


@dataclass
class PacketConfig:
    nk: int = 33
    window: str = "band"  # or "quarter"
    one_sided_interval: bool = False
    propagator: str = "eig"  # or "midpoint"
    n_times: int = 64


@dataclass
class RunConfig:
    epsilon: float
    beta: float
    grid: GridConfig = field(default_factory=GridConfig)
    k: KConfig = field(default_factory=KConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)
    packet: PacketConfig = field(default_factory=PacketConfig)
    out_dir: str = "wavespec-out"
    cache_dir: str | None = None

    @property
    def params(self) -> Params:
        return Params(self.epsilon, self.beta)

    def resolved_cache_dir(self) -> Path:
        if self.cache_dir is not None:
            return Path(self.cache_dir)
        env = os.environ.get("WAVESPEC_CACHE")
        if env:
            return Path(env)
        return Path.home() / ".cache" / "wavespec"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["grid"]["Lx"] is None:
            d["grid"]["Lx"] = "auto"
        if d["cache_dir"] is None:
            del d["cache_dir"]
        return d

    def digest(self) -> str:
        """Short hash of the settings that affect numerical results."""
        d = self.to_dict()
        d.pop("out_dir", None)
        d.pop("cache_dir", None)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SECTIONS = {"grid": GridConfig, "k": KConfig, "tolerances": Tolerances, "packet": PacketConfig}
_TOP = {"epsilon", "beta", "out_dir", "cache_dir"}


def _coerce(path, value, kind):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    return value


_FIELD_TYPES = {
    ("grid", "Nx"): int,
    ("grid", "Nz"): int,
    ("k", "k_min"): float,
    ("k", "k_max"): float,
    ("k", "nk"): int,
    ("k", "spacing"): str,
    ("tolerances", "newton_tol"): float,
    ("tolerances", "re_tol"): float,
    ("tolerances", "sym_tol"): float,
    ("packet", "nk"): int,
    ("packet", "window"): str,
    ("packet", "one_sided_interval"): bool,
    ("packet", "propagator"): str,
    ("packet", "n_times"): int,
}


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig; unknown keys and bad values are errors."""
    unknown = set(data) - _TOP - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
    for key in ("epsilon", "beta"):
        if key not in data:
            raise ConfigError(f"{key}: required")
    kwargs = {
        "epsilon": _coerce("epsilon", data["epsilon"], float),
        "beta": _coerce("beta", data["beta"], float),
    }
    for key in ("out_dir", "cache_dir"):
        if key in data:
            kwargs[key] = _coerce(key, data[key], str)
    for name, cls in _SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"{name}: expected a table")
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(sec) - names
        if bad:
            raise ConfigError(f"{name}.{sorted(bad)[0]}: unknown key")
        values = {}
        for key, val in sec.items():
            path = f"{name}.{key}"
            if (name, key) == ("grid", "Lx"):
                values[key] = None if val == "auto" else _coerce(path, val, float)
            else:
                values[key] = _coerce(path, val, _FIELD_TYPES[(name, key)])
        kwargs[name] = cls(**values)
    cfg = RunConfig(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    errors = []
    if not cfg.epsilon > 0:
        errors.append("epsilon: epsilon must be positive")
    elif cfg.epsilon > EPSILON_CAP:
        errors.append(f"epsilon: epsilon must not exceed {EPSILON_CAP}")
    if not cfg.beta > 1.0 / 3.0:
        errors.append("beta: beta must exceed 1/3")
    g = cfg.grid
    if g.Lx is not None and not g.Lx > 0:
        errors.append("grid.Lx: Lx must be positive")
    if g.Nx % 2:
        errors.append("grid.Nx: Nx must be even")
    elif g.Nx < 16:
        errors.append("grid.Nx: Nx must be at least 16")
    if g.Nz < 8:
        errors.append("grid.Nz: Nz must be at least 8")
    k = cfg.k
    if k.k_min < 0:
        errors.append("k.k_min: k_min must be nonnegative")
    if not k.k_max > k.k_min:
        errors.append("k.k_max: k_max must exceed k_min")
    if k.nk < 8:
        errors.append("k.nk: nk must be at least 8")
    if k.spacing not in ("adaptive", "uniform"):
        errors.append("k.spacing: expected 'adaptive' or 'uniform'")
    for name in ("newton_tol", "re_tol", "sym_tol"):
        if not getattr(cfg.tolerances, name) > 0:
            errors.append(f"tolerances.{name}: must be positive")
    p = cfg.packet
    if p.nk < 1:
        errors.append("packet.nk: nk must be positive")
    if p.window not in ("band", "quarter"):
        errors.append("packet.window: expected 'band' or 'quarter'")
    if p.propagator not in ("eig", "midpoint"):
        errors.append("packet.propagator: expected 'eig' or 'midpoint'")
    if p.n_times < 3:
        errors.append("packet.n_times: at least 3 times are needed")
    if errors:
        raise ConfigError("; ".join(errors))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(tomli_w.dumps(cfg.to_dict()))
