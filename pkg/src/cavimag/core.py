"""Shared value types, unit conversions and error classes.

Conventions
-----------
Every public API takes and returns *linear* frequencies in Hz.  Formula
evaluators convert to angular frequency (rad/s) internally.  Damping rates
are half-width-at-half-maximum values, also stored in Hz.  Angles are in
degrees at the API surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class ModelError(Exception):
    """Base class for numerical model failures."""


class SingularityError(ModelError):
    """A model denominator or system matrix vanished at an evaluation point."""

    def __init__(self, message: str, *, frequency: float | None = None, field: float | None = None):
        super().__init__(message)
        self.frequency = frequency
        self.field = field


class DomainError(ModelError, ValueError):
    """An input lies outside the domain where a quantity is defined."""


def _check_nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class Frequency:
    """Linear frequency in Hz."""

    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _check_nonnegative("frequency", self.value))

    @property
    def angular(self) -> float:
        return to_angular(self.value)

    @classmethod
    def from_angular(cls, omega: float) -> "Frequency":
        return cls(omega / TWO_PI)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class DampingRate:
    """HWHM decay rate in Hz."""

    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _check_nonnegative("damping rate", self.value))

    @property
    def angular(self) -> float:
        return TWO_PI * self.value

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Angle:
    """Rotation angle in degrees.  The raw value is preserved."""

    value: float

    @property
    def radians(self) -> float:
        return math.radians(self.value)

    @property
    def normalized(self) -> float:
        """The angle folded into [0, 180) degrees."""
        folded = math.fmod(self.value, 180.0)
        if folded < 0.0:
            folded += 180.0
        return 0.0 if folded == 180.0 else folded

    @classmethod
    def from_radians(cls, rad: float) -> "Angle":
        return cls(math.degrees(rad))

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class ComplexS21:
    """Dimensionless complex transmission amplitude."""

    re: float
    im: float

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexS21":
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)

    @property
    def db(self) -> float:
        return db_magnitude(self)

    def __complex__(self) -> complex:
        return self.value

    def __abs__(self) -> float:
        return self.magnitude


def to_angular(f):
    """Convert linear frequency (Hz) to angular frequency (rad/s).

    Accepts a scalar, a :class:`Frequency` or a numpy array.
    """
    if isinstance(f, Frequency):
        f = f.value
    if np.ndim(f) == 0:
        f = float(f)
        if f < 0.0:
            raise ValueError(f"frequency must be >= 0, got {f!r}")
        return TWO_PI * f
    arr = np.asarray(f, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("frequencies must be >= 0")
    return TWO_PI * arr


def to_linear(omega):
    """Inverse of :func:`to_angular`."""
    if np.ndim(omega) == 0:
        return float(omega) / TWO_PI
    return np.asarray(omega, dtype=float) / TWO_PI


def db_magnitude(s) -> float | np.ndarray:
    """Return 20*log10|s|.  A zero amplitude maps to ``-inf``.

    ``s`` may be a :class:`ComplexS21`, a python/numpy complex scalar or an
    array of complex amplitudes.
    """
    if isinstance(s, ComplexS21):
        mag = s.magnitude
    else:
        mag = np.abs(s)
    with np.errstate(divide="ignore"):
        out = 20.0 * np.log10(mag)
    if np.ndim(out) == 0:
        return float(out)
    return out


def as_float_array(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def check_increasing(values: np.ndarray, name: str) -> None:
    if values.size == 0:
        raise ValueError(f"{name} must not be empty")
    if values.size > 1 and not np.all(np.diff(values) > 0):
        raise ValueError(f"{name} must be strictly increasing")
