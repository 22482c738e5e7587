"""Simulation configuration: defaults, TOML loading and validation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ORTH_ALL = ("Johnson", "GS", "PC", "VM")
REALLOC_ALL = ("GDA", "CorPA", "RegPA", "IdA")
P_CAP = 20


def default_n_ev(p: int) -> int:
    """Eigenvalue sets per p in the full-size design: 1000 up to p=6, 2500 beyond."""
    return 1000 if p <= 6 else 2500


@dataclass(frozen=True)
class SimulationConfig:
    p_min: int = 3
    p_max: int = 10
    n_ev: Optional[int] = None  # None: default_n_ev(p)
    n_seeds: int = 10
    n_responses: int = 100
    r_squared: float = 0.8
    master_seed: int = 2024
    orth_set: tuple = ORTH_ALL
    realloc_set: tuple = REALLOC_ALL
    out_path: str = "simulation.csv"
    per_response: bool = False
    map_tol: float = 1e-8
    map_max_iter: int = 1000

    def n_ev_for(self, p: int) -> int:
        return default_n_ev(p) if self.n_ev is None else self.n_ev

    def validate(self) -> "SimulationConfig":
        if not (2 <= self.p_min <= self.p_max <= P_CAP):
            raise ConfigError(f"need 2 <= p_min <= p_max <= {P_CAP}, got {self.p_min}..{self.p_max}")
        for name in ("n_seeds", "n_responses", "map_max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.n_ev is not None and self.n_ev < 1:
            raise ConfigError("n_ev must be at least 1")
        if not (0.0 < self.r_squared <= 1.0):
            raise ConfigError(f"r_squared must lie in (0, 1], got {self.r_squared}")
        if not (0 <= self.master_seed < 2**64):
            raise ConfigError("master_seed must be a non-negative 64-bit integer")
        if not self.orth_set or not set(self.orth_set) <= set(ORTH_ALL):
            raise ConfigError(f"orth_set must be a non-empty subset of {ORTH_ALL}")
        if not self.realloc_set or not set(self.realloc_set) <= set(REALLOC_ALL):
            raise ConfigError(f"realloc_set must be a non-empty subset of {REALLOC_ALL}")
        if self.map_tol <= 0:
            raise ConfigError("map_tol must be positive")
        return self

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def fingerprint(self) -> dict:
        """Fields that determine the output rows (everything except where they go)."""
        d = dataclasses.asdict(self)
        d.pop("out_path")
        d["orth_set"] = list(self.orth_set)
        d["realloc_set"] = list(self.realloc_set)
        return d


_ALIASES = {
    "n_s": "n_seeds",
    "n_u": "n_responses",
    "r2": "r_squared",
    "seed": "master_seed",
    "out": "out_path",
    "orth": "orth_set",
    "realloc": "realloc_set",
}


def _order(values, allowed):
    if isinstance(values, str):
        values = [v.strip() for v in values.split(",") if v.strip()]
    unknown = [v for v in values if v not in allowed]
    if unknown:
        raise ConfigError(f"unknown tags {unknown}; choose from {allowed}")
    return tuple(v for v in allowed if v in values)


def normalize(entries: dict) -> dict:
    """Map TOML/CLI spellings onto SimulationConfig fields, checking names and tag sets."""
    known = {f.name for f in dataclasses.fields(SimulationConfig)}
    out = {}
    for k, v in entries.items():
        k = _ALIASES.get(k.replace("-", "_"), k.replace("-", "_"))
        if k not in known:
            raise ConfigError(f"unknown configuration key {k!r}")
        out[k] = v
    if "orth_set" in out:
        out["orth_set"] = _order(out["orth_set"], ORTH_ALL)
    if "realloc_set" in out:
        out["realloc_set"] = _order(out["realloc_set"], REALLOC_ALL)
    return out


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    # accept either a flat table or a [simulation] section
    data = data.get("simulation", data)
    return normalize(data)
