from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import as_float_array, check_increasing


@dataclass
class Spectrum:
    """A single S21 trace on a strictly increasing frequency grid (Hz).

    ``s21`` holds complex values, or real magnitudes when ``magnitude_only``.
    """

    f_grid: np.ndarray
    s21: np.ndarray
    magnitude_only: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.f_grid = as_float_array(self.f_grid, "f_grid")
        check_increasing(self.f_grid, "f_grid")
        dtype = float if self.magnitude_only else complex
        self.s21 = np.atleast_1d(np.asarray(self.s21, dtype=dtype))
        if self.s21.shape != self.f_grid.shape:
            raise ValueError(
                f"spectrum has {self.f_grid.size} frequencies but {self.s21.size} S21 values"
            )

    def __len__(self) -> int:
        return self.f_grid.size

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.s21)


@dataclass
class FitConfig:
    """Optimiser setup shared by both fitting stages.

    ``initial``, ``lower`` and ``upper`` map parameter names to values in SI
    units.  Only names listed in ``free`` are varied; the rest stay at their
    initial value.  Bounds missing from ``lower``/``upper`` are unbounded.
    """

    free: tuple[str, ...]
    initial: dict[str, float]
    lower: dict[str, float] = field(default_factory=dict)
    upper: dict[str, float] = field(default_factory=dict)
    ftol: float = 1e-14
    xtol: float = 1e-12
    gtol: float = 1e-10
    max_iter: int = 200
    complex_residuals: bool = False
    scale: dict[str, float] = field(default_factory=dict)
    # Stage-2 only.
    objective: str = "surface"
    window_hz: float = 300e6
    prominence: float = 0.05
    min_track: int = 5

    def __post_init__(self) -> None:
        self.free = tuple(self.free)
        unknown = [p for p in self.free if p not in self.initial]
        if unknown:
            raise ValueError(f"free parameters without initial value: {unknown}")
        for name, v in self.initial.items():
            lo, hi = self.bounds(name)
            if not lo <= v <= hi:
                raise ValueError(f"initial {name} = {v!r} outside bounds [{lo!r}, {hi!r}]")
        for tol in ("ftol", "xtol", "gtol"):
            if not getattr(self, tol) > 0:
                raise ValueError(f"{tol} must be > 0")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.objective not in ("surface", "ridge"):
            raise ValueError(f"objective must be 'surface' or 'ridge', got {self.objective!r}")

    def bounds(self, name: str) -> tuple[float, float]:
        return self.lower.get(name, -math.inf), self.upper.get(name, math.inf)


@dataclass
class FitResult:
    params: dict[str, float]
    free: tuple[str, ...]
    objective: float
    residuals: np.ndarray
    n_iter: int
    converged: bool
    stderr: dict[str, float]
    trace: list[float] = field(default_factory=list)
    message: str = ""
    at_bounds: tuple[str, ...] = ()
    flags: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def rms(self) -> float:
        if self.residuals.size == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.residuals**2)))
