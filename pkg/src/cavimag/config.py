"""JSON run configuration for the command-line tool.

Every physical quantity must be given explicitly; only tolerances, grid
resolutions and similar numerics have defaults.  Values are SI: frequencies
and rates in Hz, capacitance in F, inductance in H, resistance in Ohm.
Fields are in Oe and angles in degrees.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .circuit import TwoModeCircuit
from .hybrid import CouplingSet, HybridModeSet, KittelParams, Mode, ModeTriplet
from .io import SCHEMA_VERSION
from .polarization import AngularCouplingModel

Positive = Annotated[float, Field(gt=0, allow_inf_nan=False)]
NonNegative = Annotated[float, Field(ge=0, allow_inf_nan=False)]


class ConfigError(ValueError):
    """The run configuration is missing, malformed or physically invalid."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Grid(_Strict):
    """``points`` samples from ``start`` to ``stop`` inclusive."""

    start: NonNegative
    stop: NonNegative
    points: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.points > 1 and not self.stop > self.start:
            raise ValueError("grid stop must exceed start when points > 1")
        if self.points == 1 and self.stop != self.start:
            raise ValueError("a one-point grid needs start == stop")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class AngleGrid(Grid):
    start: float
    stop: float


class CircuitBlock(_Strict):
    f1: Positive
    f2: Positive
    C: Positive
    C1: Positive
    C2: Positive
    L: Positive
    M1: NonNegative
    M2: NonNegative
    M12: NonNegative
    R1: NonNegative
    R2: NonNegative
    Z0: Positive

    def params(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in TwoModeCircuit.PARAM_NAMES}

    def build(self) -> TwoModeCircuit:
        return TwoModeCircuit.from_params(self.params(), Z0=self.Z0)


class ModeBlock(_Strict):
    f: Positive
    beta: NonNegative
    gamma: NonNegative


class MagnonBlock(_Strict):
    beta: NonNegative
    gamma: NonNegative


class CouplingBlock(_Strict):
    g12: NonNegative
    g23: NonNegative
    g31: NonNegative


class KittelBlock(_Strict):
    gyro_mhz_per_oe: Positive
    m_eff_oe: Positive


class HybridBlock(_Strict):
    photon1: ModeBlock
    photon2: ModeBlock
    magnon: MagnonBlock
    couplings: CouplingBlock
    kittel: KittelBlock

    def build(self) -> HybridModeSet:
        p1, p2, m = self.photon1, self.photon2, self.magnon
        return HybridModeSet(
            ModeTriplet(Mode(p1.f, p1.beta, p1.gamma), Mode(p2.f, p2.beta, p2.gamma), Mode(0.0, m.beta, m.gamma)),
            CouplingSet(**self.couplings.model_dump()),
            KittelParams(self.kittel.gyro_mhz_per_oe, self.kittel.m_eff_oe),
        )


class NoiseBlock(_Strict):
    """Additive Gaussian noise on |S21| (linear), for robustness tests."""

    sigma: Positive


class FitBlock(_Strict):
    free: list[str]
    lower: dict[str, float] = Field(default_factory=dict)
    upper: dict[str, float] = Field(default_factory=dict)
    ftol: Positive = 1e-14
    xtol: Positive = 1e-12
    gtol: Positive = 1e-10
    max_iter: int = Field(default=200, ge=0)
    complex_residuals: bool = False
    seed_resonances: bool = True
    objective: Literal["surface", "ridge"] = "surface"
    window_hz: Positive = 300e6
    prominence: Positive = 0.05
    min_track: int = Field(default=5, ge=1)


class _Run(_Strict):
    schema_version: Literal[SCHEMA_VERSION]
    theta_deg: float | None = None
    threads: int = Field(default=1, ge=1)


class SimulateCircuitConfig(_Run):
    command: Literal["simulate-circuit"]
    circuit: CircuitBlock
    f_grid: Grid
    noise: NoiseBlock | None = None


class SimulateHybridConfig(_Run):
    command: Literal["simulate-hybrid"]
    hybrid: HybridBlock
    h_grid: Grid
    f_grid: Grid
    noise: NoiseBlock | None = None


class FitCircuitConfig(_Run):
    command: Literal["fit-circuit"]
    circuit: CircuitBlock
    fit: FitBlock
    data: list[str] = Field(default_factory=list)
    noise: NoiseBlock | None = None

    @model_validator(mode="after")
    def _names(self):
        bad = set(self.fit.free) | set(self.fit.lower) | set(self.fit.upper)
        bad -= set(TwoModeCircuit.PARAM_NAMES)
        if bad:
            raise ValueError(f"unknown circuit parameters in fit block: {sorted(bad)}")
        return self


class FitHybridConfig(_Run):
    command: Literal["fit-hybrid"]
    hybrid: HybridBlock
    fit: FitBlock
    data: list[str] = Field(default_factory=list)
    noise: NoiseBlock | None = None

    @model_validator(mode="after")
    def _names(self):
        allowed = {"g12", "g23", "g31", "gyro", "m_eff"}
        bad = (set(self.fit.free) | set(self.fit.lower) | set(self.fit.upper)) - allowed
        if bad:
            raise ValueError(f"unknown hybrid parameters in fit block: {sorted(bad)}")
        return self


class AngularBlock(_Strict):
    gamma1_max: NonNegative
    gamma2_max: NonNegative

    def build(self) -> AngularCouplingModel:
        return AngularCouplingModel(self.gamma1_max, self.gamma2_max)


class PolarizationConfig(_Run):
    command: Literal["polarization-report"]
    angular: AngularBlock
    theta_grid: AngleGrid = AngleGrid(start=0.0, stop=180.0, points=181)
    delta_grid: Grid = Grid(start=0.1, stop=10.0, points=100)
    report_angles: list[float] = Field(default_factory=lambda: [0.0, 30.0, 60.0, 90.0])
    measured_range_deg: tuple[float, float] = (0.0, 90.0)


RunConfig = Annotated[
    Union[SimulateCircuitConfig, SimulateHybridConfig, FitCircuitConfig, FitHybridConfig, PolarizationConfig],
    Field(discriminator="command"),
]


class _Document(BaseModel):
    run: RunConfig


def parse_config(doc: dict):
    """Validate a decoded JSON document and build its domain objects once."""
    try:
        cfg = _Document(run=doc).run
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    try:
        if hasattr(cfg, "circuit"):
            cfg.circuit.build()
        if hasattr(cfg, "hybrid"):
            cfg.hybrid.build()
        if hasattr(cfg, "angular"):
            cfg.angular.build()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(doc)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"][1:])
        lines.append(f"{loc or '<root>'}: {err['msg']}")
    return "invalid configuration:\n  " + "\n  ".join(lines)
