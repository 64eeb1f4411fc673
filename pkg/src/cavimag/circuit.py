"""Two-resonator equivalent circuit of a microstrip loaded by an ELC resonator.

The line is a series inductance ``L`` between two shunt admittances
``Y1 = Y2 = j*omega*C/2``.  Each photon mode is a series RLC loop that couples
to the line through a mutual inductance; the two loops may also couple to each
other through ``M12``.  Eliminating the loop currents gives a frequency
dependent series impedance ``Zs = j*omega*L + dZ`` which is cascaded with the
shunt elements and converted to S21.

All inputs are SI (H, F, Ohm, Hz).  ``omega`` always means angular frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import TWO_PI, ComplexS21, DampingRate, SingularityError, to_angular

# Relative size below which a denominator is treated as an exact zero.
_SINGULAR_RTOL = 1e-30


@dataclass(frozen=True)
class TransmissionLine:
    L: float
    C: float
    Z0: float = 50.0

    def __post_init__(self) -> None:
        for name in ("L", "C", "Z0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"TransmissionLine.{name} must be > 0, got {v!r}")


@dataclass(frozen=True)
class ResonatorRLC:
    """Series RLC loop with mutual inductance ``M`` to the feed line."""

    L: float
    C: float
    R: float = 0.0
    M: float = 0.0

    def __post_init__(self) -> None:
        if not (self.L > 0 and self.C > 0 and math.isfinite(self.L) and math.isfinite(self.C)):
            raise ValueError("ResonatorRLC needs L > 0 and C > 0")
        if not (self.R >= 0 and math.isfinite(self.R)):
            raise ValueError(f"ResonatorRLC.R must be >= 0, got {self.R!r}")
        if not (self.M >= 0 and math.isfinite(self.M)):
            raise ValueError(f"ResonatorRLC.M must be >= 0, got {self.M!r}")
        if not math.isfinite(self.f0) or self.f0 <= 0:
            raise ValueError("resonance frequency must be finite and positive")

    @classmethod
    def from_resonance(cls, f0: float, C: float, R: float = 0.0, M: float = 0.0) -> "ResonatorRLC":
        """Build a resonator from its linear resonance frequency.

        The loop inductance follows from ``L = 1/(omega0**2 * C)``.
        """
        if not (f0 > 0 and C > 0):
            raise ValueError("f0 and C must be positive")
        w0 = TWO_PI * f0
        return cls(L=1.0 / (w0 * w0 * C), C=C, R=R, M=M)

    @property
    def omega0(self) -> float:
        return 1.0 / math.sqrt(self.L * self.C)

    @property
    def f0(self) -> float:
        return self.omega0 / TWO_PI


@dataclass(frozen=True)
class TwoModeCircuit:
    line: TransmissionLine
    mode1: ResonatorRLC
    mode2: ResonatorRLC
    M12: float = 0.0

    def __post_init__(self) -> None:
        if not (self.M12 >= 0 and math.isfinite(self.M12)):
            raise ValueError(f"M12 must be >= 0, got {self.M12!r}")

    # Flat parameter view used by the fitter and the config/IO layer.
    PARAM_NAMES = ("f1", "f2", "C", "C1", "C2", "L", "M1", "M2", "M12", "R1", "R2")

    def to_params(self) -> dict[str, float]:
        return {
            "f1": self.mode1.f0,
            "f2": self.mode2.f0,
            "C": self.line.C,
            "C1": self.mode1.C,
            "C2": self.mode2.C,
            "L": self.line.L,
            "M1": self.mode1.M,
            "M2": self.mode2.M,
            "M12": self.M12,
            "R1": self.mode1.R,
            "R2": self.mode2.R,
        }

    @classmethod
    def from_params(cls, p: dict[str, float], Z0: float = 50.0) -> "TwoModeCircuit":
        missing = set(cls.PARAM_NAMES) - set(p)
        if missing:
            raise KeyError(f"missing circuit parameters: {sorted(missing)}")
        return cls(
            line=TransmissionLine(L=p["L"], C=p["C"], Z0=Z0),
            mode1=ResonatorRLC.from_resonance(p["f1"], p["C1"], p["R1"], p["M1"]),
            mode2=ResonatorRLC.from_resonance(p["f2"], p["C2"], p["R2"], p["M2"]),
            M12=p["M12"],
        )

    def decoupled(self) -> "TwoModeCircuit":
        """Same circuit with every mutual inductance set to zero."""
        return replace(
            self,
            mode1=replace(self.mode1, M=0.0),
            mode2=replace(self.mode2, M=0.0),
            M12=0.0,
        )


@dataclass(frozen=True)
class ABCDMatrix:
    A: complex
    B: complex
    C: complex
    D: complex

    @property
    def determinant(self) -> complex:
        return self.A * self.D - self.B * self.C

    def as_array(self) -> np.ndarray:
        return np.array([[self.A, self.B], [self.C, self.D]], dtype=complex)

    def s21(self, Z0: float) -> complex:
        return 2.0 / (self.A + self.B / Z0 + self.C * Z0 + self.D)


def _omega(f) -> np.ndarray | float:
    w = to_angular(f)
    if np.any(np.asarray(w) <= 0):
        raise ValueError("frequency must be > 0")
    return w


def _delta_impedance(circuit: TwoModeCircuit, w):
    m1, m2 = circuit.mode1, circuit.mode2
    C1, C2, R1, R2 = m1.C, m2.C, m1.R, m2.R
    M1, M2, M12 = m1.M, m2.M, circuit.M12
    x1 = (w / m1.omega0) ** 2
    x2 = (w / m2.omega0) ** 2

    num = 1j * w**3 * (
        C1 * M1**2 * (1.0 - x2)
        + C2 * M2**2 * (1.0 - x1)
        # The loop equations give omega**2 here; a single power of omega
        # would not be dimensionally consistent with the other terms.
        + 2.0 * w**2 * M12 * M1 * M2 * C1 * C2
        + 1j * w * C1 * C2 * (R1 * M2**2 + R2 * M1**2)
    )
    den = (1.0 - x1 + 1j * w * R1 * C1) * (1.0 - x2 + 1j * w * R2 * C2) - w**4 * M12**2 * C1 * C2

    scale = (1.0 + x1 + w * R1 * C1) * (1.0 + x2 + w * R2 * C2) + w**4 * M12**2 * C1 * C2
    bad = np.abs(den) <= _SINGULAR_RTOL * scale
    if np.any(bad):
        f_bad = float(np.atleast_1d(w)[np.argmax(np.atleast_1d(bad))] / TWO_PI)
        raise SingularityError(
            f"coupled-resonator impedance is singular at f = {f_bad:.12g} Hz", frequency=f_bad
        )
    return num / den


def delta_impedance(circuit: TwoModeCircuit, f):
    """Impedance added to the line by the two coupled resonators (Ohm).

    ``f`` may be a scalar or an array of linear frequencies in Hz.
    """
    w = _omega(f)
    return _delta_impedance(circuit, w)


def series_impedance(circuit: TwoModeCircuit, f):
    """Total series impedance ``j*omega*L + dZ`` (Ohm)."""
    w = _omega(f)
    return 1j * w * circuit.line.L + _delta_impedance(circuit, w)


def abcd_cascade(Zs, Y1, Y2) -> ABCDMatrix:
    """Cascade shunt ``Y1``, series ``Zs`` and shunt ``Y2``.

    Works elementwise on arrays; the returned entries then are arrays.
    """
    return ABCDMatrix(
        A=1.0 + Y2 * Zs,
        B=Zs,
        C=Y1 + Y2 * (1.0 + Y1 * Zs),
        D=1.0 + Y1 * Zs,
    )


def circuit_abcd(circuit: TwoModeCircuit, f) -> ABCDMatrix:
    w = _omega(f)
    Zs = 1j * w * circuit.line.L + _delta_impedance(circuit, w)
    Y = 1j * w * circuit.line.C / 2.0
    return abcd_cascade(Zs, Y, Y)


def circuit_response(circuit: TwoModeCircuit, f) -> np.ndarray:
    """Complex S21 of the circuit on a frequency grid (array in, array out)."""
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    abcd = circuit_abcd(circuit, f_arr)
    Z0 = circuit.line.Z0
    den = abcd.A + abcd.B / Z0 + abcd.C * Z0 + abcd.D
    bad = np.abs(den) == 0.0
    if np.any(bad):
        f_bad = float(f_arr[np.argmax(bad)])
        raise SingularityError(f"S21 denominator vanishes at f = {f_bad:.12g} Hz", frequency=f_bad)
    return 2.0 / den


def s21_circuit(circuit: TwoModeCircuit, f: float) -> ComplexS21:
    """S21 of the circuit at a single linear frequency ``f`` (Hz)."""
    return ComplexS21.from_complex(circuit_response(circuit, float(f))[0])


def bare_line_response(line: TransmissionLine, f) -> np.ndarray:
    """S21 of the line alone (no resonators)."""
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    w = _omega(f_arr)
    Y = 1j * w * line.C / 2.0
    abcd = abcd_cascade(1j * w * line.L, Y, Y)
    return abcd.s21(line.Z0)


def intrinsic_damping(res: ResonatorRLC) -> DampingRate:
    """Resistive HWHM linewidth ``omega0**2 R C / 2``, returned in Hz."""
    w0 = res.omega0
    return DampingRate(w0 * w0 * res.R * res.C / 2.0 / TWO_PI)


def extrinsic_damping(res: ResonatorRLC, Z0: float) -> DampingRate:
    """Radiative HWHM linewidth ``omega0**4 M**2 C / (2 Z0)``, returned in Hz."""
    if not Z0 > 0:
        raise ValueError("Z0 must be > 0")
    w0 = res.omega0
    return DampingRate(w0**4 * res.M**2 * res.C / (2.0 * Z0) / TWO_PI)
