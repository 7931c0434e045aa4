"""Experiment configuration and its TOML file format.

A config file holds flat ``key = value`` pairs, either at top level or in a
single ``[experiment]`` table::

    n = 400
    zeta_grid = [0.25, 0.5, 1.0]
    eta_grid = [0.5, 1.0, 2.0]
    alpha = 0.01
    reps = 50
    seed = 7

Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .datagen import TrueModel
from .hazard import KnotGrid

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "default_eta_grid"]

WORKERS_ENV = "HDSA_WORKERS"


class ConfigError(ValueError):
    pass


def default_eta_grid(points: int = 20) -> tuple:
    return tuple(float(x) for x in np.geomspace(0.1, 6.0, points))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 400
    zeta_grid: tuple = (0.25, 0.5, 1.0)
    eta_grid: tuple = field(default_factory=default_eta_grid)
    alpha: float = 0.01
    knot_count: int = 12
    t_max: float = 3.0
    reps: int = 50
    seed: int = 0
    population_m: int = 2000
    theory_m: Optional[int] = None
    rs_tol: float = 1e-8
    rs_damping: float = 0.5
    rs_max_iter: int = 20000
    n_test: Optional[int] = None
    grad_tol: float = 1e-8
    fit_max_iter: int = 500
    beta0_norm: float = 1.0
    censor_lo: float = 1.0
    censor_hi: float = 3.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "zeta_grid", tuple(float(z) for z in self.zeta_grid))
        object.__setattr__(self, "eta_grid", tuple(float(e) for e in self.eta_grid))
        if not self.zeta_grid or not self.eta_grid:
            raise ConfigError("zeta_grid and eta_grid must be nonempty")
        if len(set(self.zeta_grid)) != len(self.zeta_grid) or len(set(self.eta_grid)) != len(self.eta_grid):
            raise ConfigError("grid values must be distinct")
        if self.n < 1 or self.reps < 1:
            raise ConfigError("n and reps must be >= 1")
        if any(z <= 0 for z in self.zeta_grid) or any(e <= 0 for e in self.eta_grid):
            raise ConfigError("zeta and eta values must be > 0")
        for z in self.zeta_grid:
            if self.p_for(z) < 1:
                raise ConfigError(f"n * zeta = {self.n * z} rounds to p < 1")
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0")
        if self.knot_count < 2:
            raise ConfigError("knot_count must be >= 2")
        if not 0 < self.rs_damping <= 1:
            raise ConfigError("rs_damping must lie in (0, 1]")
        if self.population_m < 2:
            raise ConfigError("population_m must be >= 2")
        if self.t_max < self.censor_hi:
            raise ConfigError("the last knot t_max must be >= censor_hi so every event lies inside the grid")

    def p_for(self, zeta: float) -> int:
        return int(round(self.n * zeta))

    @property
    def grid(self) -> KnotGrid:
        return KnotGrid.equispaced(0.0, self.t_max, self.knot_count)

    @property
    def model(self) -> TrueModel:
        return TrueModel(beta0_norm=self.beta0_norm, censor_lo=self.censor_lo, censor_hi=self.censor_hi)

    @property
    def test_size(self) -> int:
        return self.n_test if self.n_test is not None else self.n

    @property
    def theory_population(self) -> int:
        return self.theory_m if self.theory_m is not None else self.population_m

    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        return max(1, self.workers)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_mapping(raw: dict) -> ExperimentConfig:
    if set(raw) == {"experiment"} and isinstance(raw["experiment"], dict):
        raw = raw["experiment"]
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    return config_from_mapping(raw)
