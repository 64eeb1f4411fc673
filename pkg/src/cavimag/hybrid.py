"""Three-mode photon/photon/magnon model.

Two photon modes of the resonator and the magnon mode of the film are coupled
coherently (``g12``, ``g23``, ``g31``) and dissipatively through the shared
feed line.  The field dependence enters only through the magnon frequency,
which follows the in-plane Kittel relation.

Rates and couplings are stored in linear Hz; matrices are built in rad/s.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    TWO_PI,
    ComplexS21,
    ModelError,
    SingularityError,
    as_float_array,
    check_increasing,
    db_magnitude,
)


@dataclass(frozen=True)
class Mode:
    """One bare mode: linear frequency ``f`` and HWHM rates, all in Hz."""

    f: float
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        for name in ("f", "beta", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"Mode.{name} must be finite and >= 0, got {v!r}")

    @property
    def linewidth(self) -> float:
        return self.beta + self.gamma

    @property
    def complex_omega(self) -> complex:
        """``omega - i*(beta + gamma)`` in rad/s."""
        return TWO_PI * complex(self.f, -(self.beta + self.gamma))


@dataclass(frozen=True)
class ModeTriplet:
    """Photon mode 1, photon mode 2 and the magnon.

    The magnon frequency stored here is only a placeholder; model evaluators
    replace it by the Kittel frequency at the requested field.
    """

    photon1: Mode
    photon2: Mode
    magnon: Mode

    def __iter__(self):
        return iter((self.photon1, self.photon2, self.magnon))


@dataclass(frozen=True)
class CouplingSet:
    g12: float = 0.0
    g23: float = 0.0
    g31: float = 0.0

    def __post_init__(self) -> None:
        for name in ("g12", "g23", "g31"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"coupling {name} must be >= 0, got {v!r}")


@dataclass(frozen=True)
class KittelParams:
    """In-plane Kittel constants: gyromagnetic ratio in MHz/Oe, 4*pi*Ms in G."""

    gyro: float = 2.8
    m_eff: float = 1750.0

    def __post_init__(self) -> None:
        if not (self.gyro > 0 and self.m_eff > 0):
            raise ValueError("Kittel gyro and m_eff must be > 0")


@dataclass(frozen=True)
class HybridModeSet:
    modes: ModeTriplet
    couplings: CouplingSet = CouplingSet()
    kittel: KittelParams = KittelParams()

    def with_couplings(self, **kw) -> "HybridModeSet":
        return replace(self, couplings=replace(self.couplings, **kw))


@dataclass
class FieldSweepMap:
    """|S21| on a (field, frequency) grid; rows are fields, columns frequencies."""

    h_grid: np.ndarray
    f_grid: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.h_grid = as_float_array(self.h_grid, "h_grid")
        self.f_grid = as_float_array(self.f_grid, "f_grid")
        check_increasing(self.h_grid, "h_grid")
        check_increasing(self.f_grid, "f_grid")
        self.values = np.asarray(self.values, dtype=float).reshape(self.h_grid.size, self.f_grid.size)

    @property
    def db(self) -> np.ndarray:
        return db_magnitude(self.values)

    @classmethod
    def from_db(cls, h_grid, f_grid, db, metadata=None) -> "FieldSweepMap":
        return cls(h_grid, f_grid, 10.0 ** (np.asarray(db, dtype=float) / 20.0), dict(metadata or {}))


# ---------------------------------------------------------------------------
# Kittel relation
# ---------------------------------------------------------------------------

def kittel_frequency(H, k: KittelParams = KittelParams()):
    """Magnon frequency in Hz at in-plane field ``H`` (Oe)."""
    H_arr = np.asarray(H, dtype=float)
    if np.any(H_arr < 0):
        raise ValueError("field must be >= 0")
    f = k.gyro * 1e6 * np.sqrt(H_arr * (H_arr + k.m_eff))
    return float(f) if f.ndim == 0 else f


def kittel_field(f, k: KittelParams = KittelParams()):
    """Non-negative field (Oe) at which the magnon sits at frequency ``f`` (Hz)."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr < 0):
        raise ValueError("frequency must be >= 0")
    q = (f_arr / (k.gyro * 1e6)) ** 2
    # Stable root of H**2 + m_eff*H - q = 0 (avoids cancellation at small q).
    H = 2.0 * q / (k.m_eff + np.sqrt(k.m_eff**2 + 4.0 * q))
    return float(H) if H.ndim == 0 else H


# ---------------------------------------------------------------------------
# Coupling matrix and eigenbranches
# ---------------------------------------------------------------------------

def _modes_at(params: HybridModeSet, H: float) -> tuple[Mode, Mode, Mode]:
    p1, p2, mag = params.modes
    return p1, p2, replace(mag, f=kittel_frequency(H, params.kittel))


def coupling_matrix(params: HybridModeSet, H: float) -> np.ndarray:
    """Complex-symmetric 3x3 coupling matrix at field ``H`` (rad/s entries)."""
    modes = _modes_at(params, H)
    g = params.couplings
    gam = [m.gamma for m in modes]
    out = np.empty((3, 3), dtype=complex)
    for i, m in enumerate(modes):
        out[i, i] = m.complex_omega
    for (i, j), gij in (((0, 1), g.g12), ((1, 2), g.g23), ((0, 2), g.g31)):
        out[i, j] = out[j, i] = TWO_PI * complex(gij, -math.sqrt(gam[i] * gam[j]))
    return out


def eigenbranches(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues of a coupling matrix, sorted by real part then imaginary part."""
    matrix = np.asarray(matrix, dtype=complex)
    if not np.all(np.isfinite(matrix)):
        raise ModelError(f"non-finite coupling matrix:\n{matrix}")
    try:
        ev = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"eigensolver failed ({exc}) for matrix:\n{matrix}") from exc
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def hybrid_modes(params: HybridModeSet, H: float) -> np.ndarray:
    """Complex hybrid frequencies in Hz: real part = position, -imag = HWHM."""
    return eigenbranches(coupling_matrix(params, H)) / TWO_PI


def track_branches(params: HybridModeSet, h_grid) -> np.ndarray:
    """Hybrid frequencies (Hz) along a field sweep with continuity tracking.

    Row ``i`` holds the three branches at ``h_grid[i]``.  Branches are ordered
    by real part at the first field and afterwards assigned to the nearest
    eigenvalue of the previous slice, so a branch keeps its identity through
    an anticrossing instead of being re-sorted.
    """
    h = as_float_array(h_grid, "h_grid")
    out = np.empty((h.size, 3), dtype=complex)
    prev = None
    for i, H in enumerate(h):
        ev = hybrid_modes(params, H)
        if prev is not None:
            cost = np.abs(prev[:, None] - ev[None, :])
            _, cols = linear_sum_assignment(cost)
            ev = ev[cols]
        out[i] = ev
        prev = ev
    return out


def crossing_field(params: HybridModeSet, photon: int) -> float:
    """Field (Oe) at which the bare magnon is degenerate with photon mode 1 or 2."""
    mode = params.modes.photon1 if photon == 1 else params.modes.photon2
    return kittel_field(mode.f, params.kittel)


# ---------------------------------------------------------------------------
# Transmission
# ---------------------------------------------------------------------------

def _drive_vector(modes) -> np.ndarray:
    return math.sqrt(2.0) * np.sqrt(TWO_PI * np.array([m.gamma for m in modes]))


def s21_hybrid(params: HybridModeSet, H: float, f: float) -> ComplexS21:
    """Input-output transmission ``1 + K^T M^-1 K`` at one (field, frequency)."""
    if not f > 0:
        raise ValueError("frequency must be > 0")
    modes = _modes_at(params, H)
    K = _drive_vector(modes)
    Hc = coupling_matrix(params, H)
    M = 1j * (TWO_PI * f * np.eye(3) - Hc)
    if np.linalg.cond(M) > 1e14:
        raise SingularityError(
            f"transmission matrix singular at H = {H:.12g} Oe, f = {f:.12g} Hz", frequency=f, field=H
        )
    return ComplexS21.from_complex(1.0 + K @ np.linalg.solve(M, K))


def hybrid_response(params: HybridModeSet, H: float, f_grid) -> np.ndarray:
    """Complex S21 along a frequency grid at a fixed field.

    Uses the spectral form of the resolvent,
    ``K^T (omega - Hc)^-1 K = sum_k (K^T v_k)(w_k^T K) / (omega - lambda_k)``,
    and falls back to direct solves when the eigenbasis is ill-conditioned
    (near an exceptional point).
    """
    f = np.atleast_1d(np.asarray(f_grid, dtype=float))
    w = TWO_PI * f
    modes = _modes_at(params, H)
    K = _drive_vector(modes)
    if not np.any(K):
        return np.ones(f.size, dtype=complex)
    Hc = coupling_matrix(params, H)
    lam, V = np.linalg.eig(Hc)
    hit = np.abs(w[:, None] - lam[None, :]) <= 1e-14 * np.maximum(np.abs(w[:, None]), 1.0)
    if np.any(hit):
        idx = int(np.argmax(np.any(hit, axis=1)))
        raise SingularityError(
            f"transmission matrix singular at H = {H:.12g} Oe, f = {f[idx]:.12g} Hz",
            frequency=float(f[idx]),
            field=float(H),
        )
    if np.linalg.cond(V) < 1e8:
        left = K @ V
        right = np.linalg.solve(V, K)
        resolvent = (1.0 / (w[:, None] - lam[None, :])) @ (left * right)
    else:
        A = w[:, None, None] * np.eye(3) - Hc
        resolvent = np.linalg.solve(A, np.broadcast_to(K, (f.size, 3))[..., None])[..., 0] @ K
    # M = i(omega - Hc), hence K^T M^-1 K = -i * resolvent.
    return 1.0 - 1j * resolvent


def field_sweep_complex(params: HybridModeSet, h_grid, f_grid, threads: int = 1) -> np.ndarray:
    h = as_float_array(h_grid, "h_grid")
    f = as_float_array(f_grid, "f_grid")
    check_increasing(h, "h_grid")
    check_increasing(f, "f_grid")
    if np.any(f <= 0):
        raise ValueError("frequencies must be > 0")

    def row(i: int) -> np.ndarray:
        try:
            return hybrid_response(params, h[i], f)
        except SingularityError as exc:
            j = int(np.argmin(np.abs(f - exc.frequency)))
            raise SingularityError(f"{exc} (grid row {i}, column {j})", frequency=exc.frequency,
                                   field=exc.field) from exc

    if threads > 1 and h.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(h.size)))
    else:
        rows = [row(i) for i in range(h.size)]
    return np.vstack(rows)


def field_sweep(params: HybridModeSet, h_grid, f_grid, threads: int = 1, metadata: dict | None = None) -> FieldSweepMap:
    """Evaluate |S21| on the full (H, f) grid."""
    s = field_sweep_complex(params, h_grid, f_grid, threads=threads)
    return FieldSweepMap(h_grid, f_grid, np.abs(s), dict(metadata or {}))
