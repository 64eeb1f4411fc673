"""Stage 1: circuit-model fits of photon-only spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.signal import find_peaks, peak_widths

from ..circuit import TwoModeCircuit, circuit_response
from ..core import ModelError
from .data import FitConfig, FitResult, Spectrum
from .lm import levenberg_marquardt


@dataclass(frozen=True)
class Resonance:
    f0: float
    hwhm: float
    depth: float


def _parabolic_vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    if i <= 0 or i >= len(x) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = y[i - 1 : i + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / den
    if a <= 0:
        return float(x1)
    return float(-b / (2 * a))


def find_dips(f: np.ndarray, mag: np.ndarray, prominence: float) -> tuple[np.ndarray, np.ndarray, dict]:
    """Local minima of ``mag`` with at least ``prominence``; sub-grid positions."""
    idx, props = find_peaks(-mag, prominence=prominence)
    pos = np.array([_parabolic_vertex(f, mag, i) for i in idx])
    return idx, pos, props


def extract_resonances(spec: Spectrum, prominence: float = 0.05) -> list[Resonance]:
    """Dips of |S21| deeper than ``prominence`` (linear magnitude units).

    The HWHM is read off the half-depth crossings.
    """
    if len(spec) < 16:
        raise ValueError("need at least 16 grid points to look for resonances")
    f, mag = spec.f_grid, spec.magnitude
    idx, pos, props = find_dips(f, mag, prominence)
    if idx.size == 0:
        return []
    _, _, left, right = peak_widths(-mag, idx, rel_height=0.5, prominence_data=(
        props["prominences"], props["left_bases"], props["right_bases"]))
    grid = np.arange(f.size)
    f_left = np.interp(left, grid, f)
    f_right = np.interp(right, grid, f)
    return [
        Resonance(float(p), float((fr - fl) / 2), float(d))
        for p, fl, fr, d in zip(pos, f_left, f_right, props["prominences"])
    ]


def seed_resonances(spec: Spectrum, cfg: FitConfig, prominence: float | None = None) -> FitConfig:
    """Replace the initial ``f1``/``f2`` guesses by detected dip positions.

    Only free resonance frequencies are touched.  With as many dips as free
    modes, mode 1 takes the lower dip (the modes are labelled in ascending
    frequency order, whatever the guesses say); otherwise each mode takes
    the dip nearest to its current guess.  Seeds are clipped into the bounds.
    """
    targets = [n for n in ("f1", "f2") if n in cfg.free]
    if not targets:
        return cfg
    dips = extract_resonances(spec, cfg.prominence if prominence is None else prominence)
    if not dips:
        return cfg
    pos = np.array(sorted(d.f0 for d in dips))
    initial = dict(cfg.initial)
    if len(pos) == len(targets):
        pairs = list(zip(targets, pos))
    else:
        # Each dip seeds at most one mode; unmatched modes keep their guess.
        cost = np.abs(np.array([initial[n] for n in targets])[:, None] - pos[None, :])
        rows, cols = linear_sum_assignment(cost)
        pairs = [(targets[r], pos[c]) for r, c in zip(rows, cols)]
    for name, p in pairs:
        lo, hi = cfg.bounds(name)
        initial[name] = min(max(float(p), lo), hi)
    return FitConfig(**{**cfg.__dict__, "initial": initial})


def _vectorize(cfg: FitConfig, names):
    x0 = np.array([cfg.initial[n] for n in names])
    lo = np.array([cfg.bounds(n)[0] for n in names])
    hi = np.array([cfg.bounds(n)[1] for n in names])
    scale = np.array([
        cfg.scale.get(n, abs(cfg.initial[n]) if cfg.initial[n] != 0 else
                      (hi[i] - lo[i] if math.isfinite(hi[i] - lo[i]) else 1.0))
        for i, n in enumerate(names)
    ])
    return x0, lo, hi, scale


def _at_bounds(cfg: FitConfig, params: dict[str, float], rtol: float = 1e-6) -> tuple[str, ...]:
    """Free parameters within ``rtol`` (relative to their scale) of a bound."""
    names = list(cfg.free)
    if not names:
        return ()
    _, lo, hi, scale = _vectorize(cfg, names)
    out = []
    for i, n in enumerate(names):
        tol = rtol * abs(scale[i])
        if params[n] - lo[i] <= tol or hi[i] - params[n] <= tol:
            out.append(n)
    return tuple(out)


def fit_circuit(spec: Spectrum, cfg: FitConfig, Z0: float = 50.0) -> FitResult:
    """Least-squares fit of the two-mode circuit to one spectrum.

    By default the residual is ``|S21_model| - |S21_data|``; with
    ``cfg.complex_residuals`` the real and imaginary parts are fitted.
    """
    missing = set(TwoModeCircuit.PARAM_NAMES) - set(cfg.initial)
    if missing:
        raise ValueError(f"circuit fit needs initial values for {sorted(missing)}")
    bad = set(cfg.free) - set(TwoModeCircuit.PARAM_NAMES)
    if bad:
        raise ValueError(f"unknown circuit parameters: {sorted(bad)}")
    if cfg.complex_residuals and spec.magnitude_only:
        raise ValueError("complex fit requested but the spectrum carries no phase")

    base = {n: float(cfg.initial[n]) for n in TwoModeCircuit.PARAM_NAMES}
    names = list(cfg.free)
    f = spec.f_grid
    if cfg.complex_residuals:
        data = np.concatenate([spec.s21.real, spec.s21.imag])
    else:
        data = spec.magnitude

    def unpack(x) -> dict[str, float]:
        p = dict(base)
        p.update(zip(names, map(float, x)))
        return p

    def residual(x):
        try:
            circ = TwoModeCircuit.from_params(unpack(x), Z0=Z0)
        except ValueError as exc:
            raise ModelError(str(exc)) from exc
        s = circuit_response(circ, f)
        model = np.concatenate([s.real, s.imag]) if cfg.complex_residuals else np.abs(s)
        return model - data

    x0, lo, hi, scale = _vectorize(cfg, names)
    res = levenberg_marquardt(
        residual, x0, lo, hi, scale=scale, ftol=cfg.ftol, xtol=cfg.xtol, gtol=cfg.gtol,
        max_iter=cfg.max_iter,
    )
    params = unpack(res.x)
    stderr = {n: (float(s) if res.stderr is not None else math.nan)
              for n, s in zip(names, res.stderr if res.stderr is not None else [math.nan] * len(names))}
    at_b = _at_bounds(cfg, params)
    flags = [f"{n} at bound" for n in at_b]
    for mode in (1, 2):
        if f"M{mode}" in at_b and params[f"M{mode}"] <= cfg.bounds(f"M{mode}")[0] + 1e-15:
            loose = [n for n in (f"f{mode}", f"R{mode}") if n in names]
            if loose:
                flags.append(f"mode {mode} is dark (M{mode} = 0); {', '.join(loose)} not constrained by the data")
    if not res.converged:
        flags.append("non-converged")
    return FitResult(
        params=params,
        free=tuple(names),
        objective=res.cost,
        residuals=res.residuals,
        n_iter=res.n_iter,
        converged=res.converged,
        stderr=stderr,
        trace=res.trace,
        message=res.message,
        at_bounds=at_b,
        flags=flags,
        extras={"n_eval": res.n_eval},
    )


def circuit_model(result: FitResult, Z0: float = 50.0) -> TwoModeCircuit:
    return TwoModeCircuit.from_params(result.params, Z0=Z0)
