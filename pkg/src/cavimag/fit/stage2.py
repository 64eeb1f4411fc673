"""Stage 2: coupling strengths from field-swept anticrossing maps.

Photon frequencies and linewidths are held at their stage-1 values.  The fit
first matches the real parts of the coupling-matrix eigenvalues to dip ridges
extracted from the map.  With ``objective="surface"`` (the default) that
result seeds a second fit of the full |S21| forward model over the photon
windows.  The second pass matters whenever photon and magnon linewidths
differ strongly: the eigenvalue splitting then shrinks below the splitting
of the transmission dips, and a ridge-only fit overestimates the coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..core import ModelError
from ..hybrid import (
    FieldSweepMap,
    HybridModeSet,
    KittelParams,
    hybrid_modes,
    hybrid_response,
    kittel_field,
    track_branches,
)
from .data import FitConfig, FitResult
from .lm import levenberg_marquardt
from .stage1 import _at_bounds, _vectorize, find_dips

HYBRID_PARAMS = ("g12", "g23", "g31", "gyro", "m_eff")
# Coupling that becomes observable through each photon window.
WINDOW_COUPLING = {1: "g31", 2: "g23"}


class NoRidgeError(ValueError):
    """No dip trajectory could be extracted from any photon window."""


@dataclass
class Window:
    photon: int
    f_lo: float
    f_hi: float
    h_lo: float
    h_hi: float
    rows: np.ndarray
    cols: np.ndarray

    def describe(self) -> str:
        return (f"photon-{self.photon} window: H in [{self.h_lo:.1f}, {self.h_hi:.1f}] Oe, "
                f"f in [{self.f_lo / 1e9:.4f}, {self.f_hi / 1e9:.4f}] GHz")


@dataclass
class Ridges:
    """Dip positions found in the map: one entry per (field, dip)."""

    field: np.ndarray
    freq: np.ndarray
    window: np.ndarray


def hybrid_params(base: HybridModeSet, values: dict[str, float]) -> HybridModeSet:
    c = base.couplings
    k = base.kittel
    return replace(
        base,
        couplings=replace(
            c,
            g12=values.get("g12", c.g12),
            g23=values.get("g23", c.g23),
            g31=values.get("g31", c.g31),
        ),
        kittel=KittelParams(gyro=values.get("gyro", k.gyro), m_eff=values.get("m_eff", k.m_eff)),
    )


def photon_windows(data: FieldSweepMap, params: HybridModeSet, half_width: float) -> list[Window]:
    out = []
    photons = (params.modes.photon1, params.modes.photon2)
    for i, mode in enumerate(photons, start=1):
        f_lo, f_hi = max(mode.f - half_width, 0.0), mode.f + half_width
        h_lo, h_hi = kittel_field(f_lo, params.kittel), kittel_field(f_hi, params.kittel)
        rows = np.flatnonzero((data.h_grid >= h_lo) & (data.h_grid <= h_hi))
        cols = np.flatnonzero((data.f_grid >= f_lo) & (data.f_grid <= f_hi))
        out.append(Window(i, f_lo, f_hi, h_lo, h_hi, rows, cols))
    return out


def extract_ridges(data: FieldSweepMap, windows: list[Window], prominence: float) -> Ridges:
    fields, freqs, wins = [], [], []
    for w in windows:
        if w.rows.size == 0 or w.cols.size < 3:
            continue
        f = data.f_grid[w.cols]
        for r in w.rows:
            _, pos, _ = find_dips(f, data.values[r, w.cols], prominence)
            fields.extend([data.h_grid[r]] * pos.size)
            freqs.extend(pos)
            wins.extend([w.photon] * pos.size)
    return Ridges(np.array(fields), np.array(freqs), np.array(wins, dtype=int))


def link_ridges(ridges: Ridges, max_jump: float, max_gap: int = 2) -> list[np.ndarray]:
    """Chain dips into trajectories across successive field slices.

    Each dip extends the open trajectory whose last point is nearest in
    frequency (within ``max_jump``).  Where two dips merge into one, the
    surviving dip continues the nearer trajectory and the other waits for
    the next slice.  A trajectory not extended for ``max_gap`` consecutive
    slices is closed.  Returns ``(n, 2)`` arrays of (field, frequency).
    """
    tracks: list[list[tuple[float, float]]] = []
    for win in np.unique(ridges.window):
        sel = ridges.window == win
        h, f = ridges.field[sel], ridges.freq[sel]
        slices = np.unique(h)
        open_tracks: list[list[tuple[float, float]]] = []
        for k, H in enumerate(slices):
            if k > max_gap:
                cutoff = slices[k - max_gap - 1]
                tracks.extend(t for t in open_tracks if t[-1][0] <= cutoff)
                open_tracks = [t for t in open_tracks if t[-1][0] > cutoff]
            dips = np.sort(f[h == H])
            taken = set()
            pairs = sorted(
                (abs(t[-1][1] - d), ti, di)
                for ti, t in enumerate(open_tracks)
                for di, d in enumerate(dips)
            )
            used_tracks = set()
            for dist, ti, di in pairs:
                if dist > max_jump or ti in used_tracks or di in taken:
                    continue
                open_tracks[ti].append((H, dips[di]))
                used_tracks.add(ti)
                taken.add(di)
            for di, d in enumerate(dips):
                if di not in taken:
                    open_tracks.append([(H, d)])
        tracks.extend(open_tracks)
    return [np.array(t) for t in tracks]


def filter_ridges(ridges: Ridges, max_jump: float, min_length: int) -> Ridges:
    """Drop dips that do not belong to a trajectory of at least ``min_length`` slices.

    Noise minima are isolated in field while true resonances form continuous
    ridges, so this removes most spurious dips from noisy maps.
    """
    if ridges.freq.size == 0 or min_length <= 1:
        return ridges
    keep = []
    for win in np.unique(ridges.window):
        sel = ridges.window == win
        part = Ridges(ridges.field[sel], ridges.freq[sel], ridges.window[sel])
        for t in link_ridges(part, max_jump):
            if len(t) >= min_length:
                keep.extend((h, f, win) for h, f in t)
    keep.sort()
    if not keep:
        return Ridges(np.empty(0), np.empty(0), np.empty(0, dtype=int))
    h, f, w = zip(*keep)
    return Ridges(np.array(h), np.array(f), np.array(w, dtype=int))


def _default_jump(data: FieldSweepMap, params: HybridModeSet) -> float:
    """Largest plausible dip displacement between neighbouring field slices."""
    dh = np.max(np.diff(data.h_grid)) if data.h_grid.size > 1 else 0.0
    df = np.max(np.diff(data.f_grid)) if data.f_grid.size > 1 else 0.0
    k = params.kittel
    H = max(float(data.h_grid[0]), 1.0)
    slope = k.gyro * 1e6 * (2 * H + k.m_eff) / (2 * math.sqrt(H * (H + k.m_eff)))
    return 1.5 * slope * dh + 3.0 * df


def ridge_residuals(params: HybridModeSet, ridges: Ridges) -> np.ndarray:
    """Distance (Hz) from every dip to the nearest eigenbranch real part."""
    out = np.empty(ridges.freq.size)
    for H in np.unique(ridges.field):
        sel = ridges.field == H
        branches = hybrid_modes(params, H).real
        d = ridges.freq[sel][:, None] - branches[None, :]
        out[sel] = d[np.arange(d.shape[0]), np.argmin(np.abs(d), axis=1)]
    return out


def branch_residuals(params: HybridModeSet, ridges: Ridges) -> dict[str, float]:
    """RMS ridge residual (Hz) per continuity-tracked eigenbranch."""
    if ridges.freq.size == 0:
        return {}
    h = np.unique(ridges.field)
    branches = track_branches(params, h).real
    sums = np.zeros(3)
    counts = np.zeros(3, dtype=int)
    for i, H in enumerate(h):
        sel = ridges.field == H
        d = ridges.freq[sel][:, None] - branches[i][None, :]
        k = np.argmin(np.abs(d), axis=1)
        r = d[np.arange(d.shape[0]), k]
        np.add.at(sums, k, r**2)
        np.add.at(counts, k, 1)
    return {f"branch{k}": float(math.sqrt(sums[k] / counts[k])) for k in range(3) if counts[k]}


def _surface_residual_fn(data: FieldSweepMap, windows: list[Window]):
    blocks = [(w.rows, w.cols) for w in windows if w.rows.size and w.cols.size]
    target = np.concatenate([data.values[np.ix_(r, c)].ravel() for r, c in blocks])

    def model(params: HybridModeSet) -> np.ndarray:
        parts = []
        for rows, cols in blocks:
            f = data.f_grid[cols]
            for r in rows:
                parts.append(np.abs(hybrid_response(params, data.h_grid[r], f)))
        return np.concatenate(parts) - target

    return model


def fit_hybrid(data: FieldSweepMap, fixed: HybridModeSet, cfg: FitConfig) -> FitResult:
    """Fit coupling strengths (and optionally Kittel constants) to a field map.

    ``fixed`` supplies the stage-1 photon modes, the magnon damping and the
    fallback values of every fittable parameter.
    """
    bad = set(cfg.free) - set(HYBRID_PARAMS)
    if bad:
        raise ValueError(f"unknown hybrid parameters: {sorted(bad)}")
    start = {
        "g12": fixed.couplings.g12, "g23": fixed.couplings.g23, "g31": fixed.couplings.g31,
        "gyro": fixed.kittel.gyro, "m_eff": fixed.kittel.m_eff,
    }
    start.update({k: float(v) for k, v in cfg.initial.items() if k in HYBRID_PARAMS})
    base = hybrid_params(fixed, start)

    windows = photon_windows(data, base, cfg.window_hz)
    ridges = extract_ridges(data, windows, cfg.prominence)
    ridges = filter_ridges(ridges, _default_jump(data, base), cfg.min_track)
    lit = {int(w) for w in np.unique(ridges.window)}
    if not lit:
        raise NoRidgeError(
            "no dip trajectory could be extracted; searched "
            + "; ".join(w.describe() for w in windows)
        )

    flags: list[str] = []
    free = list(cfg.free)
    values = dict(start)
    for w in windows:
        name = WINDOW_COUPLING[w.photon]
        if w.photon not in lit and name in free:
            free.remove(name)
            values[name] = cfg.bounds(name)[0] if math.isfinite(cfg.bounds(name)[0]) else 0.0
            flags.append(f"{name} unconstrained: no dips in {w.describe()}; held at {values[name]:g}")
    active = [w for w in windows if w.photon in lit]

    def unpack(x) -> HybridModeSet:
        v = dict(values)
        v.update(zip(free, map(float, x)))
        return hybrid_params(base, v)

    sub_cfg = FitConfig(**{**cfg.__dict__, "free": tuple(free),
                           "initial": {**cfg.initial, **{k: values[k] for k in values if k in HYBRID_PARAMS}}})
    x0, lo, hi, scale = _vectorize(sub_cfg, free) if free else (np.empty(0),) * 4
    # Couplings are magnitudes; never let a trial step go negative.
    for i, n in enumerate(free):
        if n.startswith("g"):
            lo[i] = max(lo[i], 0.0)
        else:
            lo[i] = max(lo[i], np.nextafter(0.0, 1.0))
    if free:
        scale = np.array([cfg.scale.get(n, max(abs(x0[i]), 1e6 if n.startswith("g") else 1.0))
                          for i, n in enumerate(free)])

    def ridge_fn(x):
        return ridge_residuals(unpack(x), ridges)

    tol = dict(ftol=cfg.ftol, xtol=cfg.xtol, gtol=cfg.gtol, max_iter=cfg.max_iter)
    res = levenberg_marquardt(ridge_fn, x0, lo, hi, scale=scale, **tol)
    ridge_values = dict(zip(free, map(float, res.x)))
    n_iter = res.n_iter
    if cfg.objective == "surface":
        surface = _surface_residual_fn(data, active)
        res = levenberg_marquardt(lambda x: surface(unpack(x)), res.x, lo, hi, scale=scale, **tol)
        n_iter += res.n_iter

    final = dict(values)
    final.update(zip(free, map(float, res.x)))
    fitted = unpack(res.x)
    stderr = {n: float(s) for n, s in zip(free, res.stderr)} if res.stderr is not None else {}
    at_b = _at_bounds(replace(cfg, free=tuple(free)), final) if free else ()
    for n in at_b:
        flags.append(f"{n} at bound")
    if not res.converged:
        flags.append("non-converged")
    return FitResult(
        params=final,
        free=tuple(free),
        objective=res.cost,
        residuals=res.residuals,
        n_iter=n_iter,
        converged=res.converged,
        stderr=stderr,
        trace=res.trace,
        message=res.message,
        at_bounds=at_b,
        flags=flags,
        extras={
            "objective_kind": cfg.objective,
            "ridge_fit": ridge_values,
            "branch_residuals_hz": branch_residuals(fitted, ridges),
            "n_dips": int(ridges.freq.size),
            "windows": [w.describe() for w in windows],
            "model": fitted,
        },
    )
