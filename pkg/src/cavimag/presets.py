"""Reference parameter sets for the four measured rotation angles.

``CIRCUIT_TABLE`` holds the fitted circuit values in display units
(GHz, pF, nH, Ohm); ``HYBRID_TABLE`` the three-mode values (GHz, MHz).
"""

from __future__ import annotations

from .circuit import TwoModeCircuit
from .hybrid import CouplingSet, HybridModeSet, KittelParams, Mode, ModeTriplet
from .polarization import AngularCouplingModel

ANGLES = (0, 30, 60, 90)

CIRCUIT_TABLE = {
    0: dict(f1=3.9350, f2=5.6778, M1=0.2150, M2=0.0000),
    30: dict(f1=3.7557, f2=5.6778, M1=0.1840, M2=0.0930),
    60: dict(f1=3.8816, f2=5.7342, M1=0.1100, M2=0.1620),
    90: dict(f1=3.8816, f2=5.7138, M1=0.0000, M2=0.1820),
}
CIRCUIT_SHARED = dict(C=1.2884, C1=0.2193, C2=0.2988, L=0.9196, M12=0.0, R1=0.9831, R2=0.8007)

HYBRID_TABLE = {
    0: dict(f1=3.9350, f2=5.6778, g31=56.5, g23=0.0, gamma1=3.0, gamma2=0.0),
    30: dict(f1=3.7557, f2=5.6778, g31=80.0, g23=76.0, gamma1=2.2, gamma2=3.5),
    60: dict(f1=3.8816, f2=5.7342, g31=98.0, g23=50.0, gamma1=0.75, gamma2=10.0),
    90: dict(f1=3.8816, f2=5.7138, g31=0.0, g23=30.0, gamma1=0.0, gamma2=13.0),
}
HYBRID_SHARED = dict(beta1=11.0, beta2=25.0, beta3=1.0, gamma3=0.01, g12=0.0)

# Maximal radiative rates (MHz) quoted alongside the angular projection model.
GAMMA1_MAX_MHZ = 3.0
GAMMA2_MAX_MHZ = 13.0

# Display-unit -> SI scale for circuit parameters.
CIRCUIT_UNITS = {
    "f1": 1e9, "f2": 1e9, "C": 1e-12, "C1": 1e-12, "C2": 1e-12, "L": 1e-9,
    "M1": 1e-9, "M2": 1e-9, "M12": 1e-9, "R1": 1.0, "R2": 1.0,
}
CIRCUIT_UNIT_LABELS = {
    "f1": "GHz", "f2": "GHz", "C": "pF", "C1": "pF", "C2": "pF", "L": "nH",
    "M1": "nH", "M2": "nH", "M12": "nH", "R1": "Ohm", "R2": "Ohm",
}


def _check_angle(theta: int) -> int:
    if theta not in CIRCUIT_TABLE:
        raise KeyError(f"no tabulated parameters for theta = {theta} deg; choose from {ANGLES}")
    return theta


def circuit_params(theta: int) -> dict[str, float]:
    """Tabulated circuit parameters at ``theta`` in SI units."""
    row = {**CIRCUIT_SHARED, **CIRCUIT_TABLE[_check_angle(theta)]}
    return {k: v * CIRCUIT_UNITS[k] for k, v in row.items()}


def circuit(theta: int, Z0: float = 50.0) -> TwoModeCircuit:
    return TwoModeCircuit.from_params(circuit_params(theta), Z0=Z0)


def hybrid(theta: int, kittel: KittelParams = KittelParams()) -> HybridModeSet:
    row = HYBRID_TABLE[_check_angle(theta)]
    s = HYBRID_SHARED
    mhz = 1e6
    modes = ModeTriplet(
        photon1=Mode(row["f1"] * 1e9, s["beta1"] * mhz, row["gamma1"] * mhz),
        photon2=Mode(row["f2"] * 1e9, s["beta2"] * mhz, row["gamma2"] * mhz),
        magnon=Mode(0.0, s["beta3"] * mhz, s["gamma3"] * mhz),
    )
    couplings = CouplingSet(g12=s["g12"] * mhz, g23=row["g23"] * mhz, g31=row["g31"] * mhz)
    return HybridModeSet(modes, couplings, kittel)


def angular_model() -> AngularCouplingModel:
    return AngularCouplingModel(GAMMA1_MAX_MHZ * 1e6, GAMMA2_MAX_MHZ * 1e6)
