"""Rotation-angle physics of the two orthogonal photon modes.

Rotating the resonator against the feed line projects the excitation field
onto the two current-loop modes: the radiative rate of mode 1 goes as
``cos^2(theta)``, that of mode 2 as ``sin^2(theta)``.  The normalised
difference of the squared rates is used as an order parameter whose zero
marks the switch of the dominant loss channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Angle, DomainError, as_float_array


@dataclass(frozen=True)
class AngularCouplingModel:
    """Maximal radiative rates (Hz): mode 1 at 0 deg, mode 2 at 90 deg."""

    gamma1_max: float
    gamma2_max: float

    def __post_init__(self) -> None:
        if not (self.gamma1_max >= 0 and self.gamma2_max >= 0):
            raise ValueError("maximal radiative rates must be >= 0")

    @property
    def delta(self) -> float:
        """Damping ratio gamma2_max / gamma1_max."""
        if self.gamma1_max <= 0:
            raise DomainError("damping ratio undefined: gamma1_max is zero")
        return self.gamma2_max / self.gamma1_max


@dataclass(frozen=True)
class LoopContributions:
    """Signed loop-wise mutual inductances (H); the sign encodes flux direction."""

    mode1: tuple[float, float]
    mode2: tuple[float, float, float, float]


@dataclass
class TransitionMap:
    theta_grid: np.ndarray
    delta_grid: np.ndarray
    values: np.ndarray  # shape (len(delta_grid), len(theta_grid))
    zero_contour: np.ndarray = field(default=None)  # delta on the Phi=0 line for each theta


def _deg(theta) -> float:
    return float(theta.value if isinstance(theta, Angle) else theta)


def _cos_sin(theta_deg):
    """cos and sin of an angle in degrees, exactly zero at multiples of 90 deg."""
    deg = np.asarray(theta_deg, dtype=float)
    t = np.radians(deg)
    r = np.mod(deg, 180.0)
    c = np.where(r == 90.0, 0.0, np.cos(t))
    s = np.where(r == 0.0, 0.0, np.sin(t))
    return c, s


def effective_mutual_mode1(c: LoopContributions) -> float:
    m_a, m_b = c.mode1
    return (m_a + m_b) / 2.0


def effective_mutual_mode2(c: LoopContributions) -> float:
    m1, m2, m3, m4 = c.mode2
    return ((m1 + m2) + (m3 + m4)) / 2.0


def gamma_of_angle(model: AngularCouplingModel, theta) -> tuple[float, float]:
    """Radiative rates (gamma1, gamma2) in Hz at rotation angle ``theta`` (deg)."""
    c, s = _cos_sin(_deg(theta))
    return float(model.gamma1_max * c**2), float(model.gamma2_max * s**2)


def order_parameter_from_rates(gamma1: float, gamma2: float) -> float:
    """(g1^2 - g2^2) / (g1^2 + g2^2) for an arbitrary pair of radiative rates."""
    a, b = gamma1 * gamma1, gamma2 * gamma2
    if a + b == 0.0:
        raise DomainError("order parameter undefined when both radiative rates vanish")
    return (a - b) / (a + b)


def _phi_delta(theta_deg, delta):
    c, s = _cos_sin(theta_deg)
    c4 = c**4
    s4 = s**4
    d2 = np.asarray(delta, dtype=float) ** 2
    den = c4 + d2 * s4
    with np.errstate(invalid="ignore", divide="ignore"):
        return (c4 - d2 * s4) / den, den


def order_parameter(model: AngularCouplingModel, theta) -> float:
    """Damping order parameter at ``theta`` in terms of the ratio delta."""
    deg = _deg(theta)
    if model.gamma1_max == 0.0:
        # Only mode 2 radiates; the ratio form is undefined but the raw form is not.
        return order_parameter_from_rates(*gamma_of_angle(model, deg))
    phi, den = _phi_delta(deg, model.delta)
    if den == 0.0:
        raise DomainError(f"order parameter undefined at theta = {deg} deg: both rates vanish")
    return float(phi)


def critical_angles(delta: float) -> tuple[float, float]:
    """Angles (deg) where the order parameter changes sign: atan(delta**-1/2) and its mirror."""
    if not delta > 0:
        raise DomainError("delta must be > 0")
    t1 = math.degrees(math.atan(delta**-0.5))
    return t1, 180.0 - t1


def transition_map(theta_grid, delta_grid) -> TransitionMap:
    """Order parameter on a (delta, theta) grid plus the Phi=0 contour."""
    theta = as_float_array(theta_grid, "theta_grid")
    delta = as_float_array(delta_grid, "delta_grid")
    if theta.size == 0 or delta.size == 0:
        raise ValueError("grids must be non-empty")
    if np.any(delta <= 0):
        raise DomainError("delta values must be > 0")
    phi, den = _phi_delta(theta[None, :], delta[:, None])
    if np.any(den == 0):
        raise DomainError("order parameter undefined on part of the grid")
    phi = np.clip(phi, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        contour = 1.0 / np.tan(np.radians(theta)) ** 2
    return TransitionMap(theta, delta, phi, contour)


def cooperativity(g: float, K: float, Gamma: float) -> float:
    """g^2 / (K * Gamma) with all three rates in the same unit."""
    if not (K > 0 and Gamma > 0):
        raise DomainError("linewidths must be > 0")
    return g * g / (K * Gamma)
