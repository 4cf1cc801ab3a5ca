"""Experiment configuration: flat ``key = value`` text with ``#`` comments.

Values given on the command line (``--set key=value``) override the file.
Grids are written ``start:stop:count:log|lin``; lists are comma separated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError

EXPERIMENTS = (
    "norm",
    "simulate",
    "sweep-jointstiffness",
    "sweep-interface",
    "sweep-manutec",
    "sweep-inertial",
    "estimate",
    "validate-bound",
)
CONTROLLERS = ("no-control", "no-motor", "pd-torque", "state-feedback", "lqr")


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    count: int
    spacing: str  # "log" or "lin"

    def values(self) -> list[float]:
        if self.spacing == "log":
            v = np.logspace(math.log10(self.start), math.log10(self.stop), self.count)
        else:
            v = np.linspace(self.start, self.stop, self.count)
        return [float(x) for x in v]

    def __str__(self) -> str:
        return f"{self.start:g}:{self.stop:g}:{self.count}:{self.spacing}"


def parse_grid(text: str) -> Grid:
    """Parse ``start:stop:count:log|lin``.

    >>> parse_grid("1e2:1e5:4:log").values()
    [100.0, 1000.0, 10000.0, 100000.0]
    """
    parts = [p.strip() for p in text.split(":")]
    if len(parts) != 4 or parts[3] not in ("log", "lin"):
        raise ConfigError(f"grid must be start:stop:count:log|lin, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"bad grid numbers in {text!r}") from None
    if not (math.isfinite(start) and math.isfinite(stop)) or count < 1:
        raise ConfigError(f"grid {text!r} needs finite bounds and count >= 1")
    if parts[3] == "log" and (start <= 0 or stop <= 0):
        raise ConfigError(f"log grid {text!r} needs positive bounds")
    if count == 1 and start != stop:
        raise ConfigError(f"grid {text!r} with one point needs start == stop")
    return Grid(start, stop, count, parts[3])


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError("empty list")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "norm"
    # robot
    J: float = 3.19
    B: float = 24.3
    K_jt: float = 10e3
    I: float = 4.5
    V: float = 20.3
    K_e: float = 30e3
    v0: float = 1.0
    # environment
    environment: str = "grounded"
    K_env: float | None = None
    B_h: float = 3.0
    I_h: float = 0.024
    # controller
    controller: str = "no-control"
    K_p: float = 1.5
    K_d: float = 0.2
    R: float = 5.0
    gain: tuple[float, ...] | None = None
    # Manutec admittance experiment
    M_t: float = 100.0
    omega_t: float = 1.0
    xi: float = 0.7
    manutec_K_e: float = 5.6e4
    M: float = 308.0
    # estimation
    sensing: str = "both"
    K_int: float | None = None
    sigma_w: tuple[float, ...] = (0.1, 0.5, 0.1, 10.0, 15.0)
    sigma_v: tuple[float, ...] = (0.1, 10.0)
    # sweeps
    K_jt_grid: Grid = Grid(1e2, 1e5, 25, "log")
    K_e_grid: Grid = Grid(1e2, 1e5, 25, "log")
    M_t_grid: Grid = Grid(25.0, 400.0, 13, "log")
    omega_t_list: tuple[float, ...] = (0.5, 1.0, 3.0, 6.0, 8.0)
    xi_list: tuple[float, ...] = (0.7,)
    r_list: tuple[float, ...] = (0.2, 0.75)
    K_e_factors: tuple[float, ...] = (10.0, 150.0)
    I_h_factors: tuple[float, ...] = (0.6, 175.0)
    variants: tuple[str, ...] = ("no-control", "no-motor", "pd-torque", "lqr")
    # validate-bound
    n_samples: int = 500
    seed: int = 42
    perturbation: float = 0.5
    # simulation
    dt: float = 1e-4
    horizon: float = 5.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.environment not in ("grounded", "inertial"):
            raise ConfigError("environment must be grounded or inertial")
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {', '.join(CONTROLLERS)}")
        for v in self.variants:
            if v not in CONTROLLERS:
                raise ConfigError(f"unknown variant {v!r}")
        if self.controller == "state-feedback" and self.gain is None:
            raise ConfigError("controller = state-feedback needs gain = k1,k2,k3,k4[,k5]")
        if self.sensing not in ("impedance", "admittance", "both"):
            raise ConfigError("sensing must be impedance, admittance or both")
        positive = ("J", "K_jt", "I", "K_e", "v0", "I_h", "R", "M_t", "omega_t", "xi", "manutec_K_e", "M", "dt", "horizon")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("B", "V", "B_h", "K_p", "K_d", "perturbation"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("K_env", "K_int"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.perturbation < 1:
            raise ConfigError("perturbation must be below 1")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.horizon < 10 * self.dt:
            raise ConfigError("horizon must be at least 10 dt")
        if len(self.sigma_w) != 5 or len(self.sigma_v) != 2:
            raise ConfigError("sigma_w needs 5 and sigma_v 2 diagonal entries")
        for name in ("xi_list", "r_list", "K_e_factors", "I_h_factors", "omega_t_list", "sigma_v"):
            if not all(x > 0 for x in getattr(self, name)):
                raise ConfigError(f"{name} entries must be positive")
        if not all(x >= 0 for x in self.sigma_w):
            raise ConfigError("sigma_w entries must be >= 0")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(key: str, text: str):
    text = text.strip()
    default = getattr(ExperimentConfig, key, None)
    if key in ("experiment", "environment", "controller", "sensing"):
        return text
    if key == "variants":
        return tuple(v.strip() for v in text.split(",") if v.strip())
    if key.endswith("_grid"):
        return parse_grid(text)
    if key in ("n_samples", "seed"):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {text!r}") from None
    if key in ("K_env", "K_int") and text.lower() in ("", "none"):
        return None
    if key == "gain" or isinstance(default, tuple):
        return _floats(text)
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    return value


def parse_pairs(lines: Iterable[str], source: str = "<config>") -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, text = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, text)
    return values


def load_config(experiment: str, path: str | Path | None = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Build a config from defaults, an optional file and ``key=value`` overrides."""
    values: dict[str, object] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_pairs(text.splitlines(), str(path)))
    values.update(parse_pairs(overrides, "--set"))
    values["experiment"] = experiment
    return replace(ExperimentConfig(), **values)
