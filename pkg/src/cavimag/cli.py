"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data-file parse error,
4 numerical failure, 5 fit did not converge (results are still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import TwoModeCircuit, circuit_response
from .config import ConfigError, load_config
from .core import ModelError, db_magnitude
from .fit.data import FitConfig, Spectrum
from .fit.report import residual_report
from .fit.stage1 import fit_circuit, seed_resonances
from .fit.stage2 import NoRidgeError, fit_hybrid
from .hybrid import FieldSweepMap, field_sweep
from .io import (
    ParseError,
    load_spectrum,
    read_grid,
    write_grid,
    write_json,
    write_matrix,
    write_spectrum_csv,
    write_table_csv,
)
from .polarization import critical_angles, gamma_of_angle, order_parameter, transition_map
from .presets import CIRCUIT_UNIT_LABELS, CIRCUIT_UNITS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4
EXIT_NOT_CONVERGED = 5

log = logging.getLogger("cavimag")


class _NotConverged(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _rng(cfg, seed):
    if cfg.noise is None:
        return None
    if seed is None:
        raise ConfigError("a noise block requires --seed")
    return np.random.default_rng(seed)


def _noisy_magnitude(values: np.ndarray, sigma: float, rng) -> np.ndarray:
    """Add N(0, sigma) to |values|; complex inputs keep their phase."""
    mag = np.abs(values)
    new = np.abs(mag + rng.normal(0.0, sigma, mag.shape))
    if np.iscomplexobj(values):
        phase = np.where(mag > 0, values / np.where(mag > 0, mag, 1.0), 1.0)
        return new * phase
    return new


def _provenance(cfg, args) -> dict:
    meta = {"command": cfg.command, "cavimag_version": __version__, "config": str(args.config),
            "theta_deg": cfg.theta_deg}
    if getattr(cfg, "noise", None) is not None:
        meta["noise"] = {"sigma": cfg.noise.sigma, "seed": args.seed}
    return meta


def _data_paths(cfg, args) -> list[Path]:
    paths = [Path(p) for p in cfg.data] + [Path(p) for p in args.data or []]
    if not paths:
        raise ConfigError("no data files: give --data or a 'data' list in the config")
    return paths


def _unique_stems(paths: list[Path]) -> list[str]:
    stems, seen = [], {}
    for p in paths:
        n = seen.get(p.stem, 0)
        seen[p.stem] = n + 1
        stems.append(p.stem if n == 0 else f"{p.stem}_{n}")
    return stems


def _fit_config(block, initial: dict[str, float]) -> FitConfig:
    return FitConfig(
        free=tuple(block.free),
        initial=initial,
        lower=dict(block.lower),
        upper=dict(block.upper),
        ftol=block.ftol,
        xtol=block.xtol,
        gtol=block.gtol,
        max_iter=block.max_iter,
        complex_residuals=block.complex_residuals,
        objective=block.objective,
        window_hz=block.window_hz,
        prominence=block.prominence,
        min_track=block.min_track,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate_circuit(cfg, args) -> Path:
    """Write the circuit S21 spectrum as CSV."""
    circ = cfg.circuit.build()
    f = cfg.f_grid.values()
    s = circuit_response(circ, f)
    rng = _rng(cfg, args.seed)
    if rng is not None:
        s = _noisy_magnitude(s, cfg.noise.sigma, rng)
    meta = {**_provenance(cfg, args), "circuit": cfg.circuit.model_dump(), "f_grid": cfg.f_grid.model_dump()}
    out = args.out / "spectrum.csv"
    write_spectrum_csv(out, f, s, meta)
    return out


def cmd_simulate_hybrid(cfg, args) -> Path:
    """Write the |S21| field-sweep map as a grid file."""
    params = cfg.hybrid.build()
    h, f = cfg.h_grid.values(), cfg.f_grid.values()
    threads = args.threads or cfg.threads
    sweep = field_sweep(params, h, f, threads=threads)
    rng = _rng(cfg, args.seed)
    if rng is not None:
        sweep = FieldSweepMap(h, f, _noisy_magnitude(sweep.values, cfg.noise.sigma, rng))
    meta = {**_provenance(cfg, args), "hybrid": cfg.hybrid.model_dump()}
    out = args.out / "map.csv"
    write_grid(out, sweep, meta)
    return out


def _circuit_result_json(res, source: str) -> dict:
    rep = residual_report(res)
    table = {
        n: {"value": res.params[n] / CIRCUIT_UNITS[n], "unit": CIRCUIT_UNIT_LABELS[n],
            "stderr": res.stderr[n] / CIRCUIT_UNITS[n] if n in res.stderr else None}
        for n in res.params
    }
    return {
        "source": source,
        "params_si": res.params,
        "table": table,
        "free": list(res.free),
        "objective": res.objective,
        "rms": rep.rms,
        "n_iter": res.n_iter,
        "converged": res.converged,
        "message": res.message,
        "at_bounds": list(res.at_bounds),
        "flags": rep.flags,
        "trace": rep.trace,
    }


def cmd_fit_circuit(cfg, args) -> Path:
    """Fit circuit parameters to photon-only spectra."""
    paths = _data_paths(cfg, args)
    spectra = [load_spectrum(p) for p in paths]
    rng = _rng(cfg, args.seed)
    results, converged = [], True
    for path, stem, spec in zip(paths, _unique_stems(paths), spectra):
        if rng is not None:
            spec = Spectrum(spec.f_grid, _noisy_magnitude(spec.s21, cfg.noise.sigma, rng),
                            spec.magnitude_only, spec.metadata)
        fcfg = _fit_config(cfg.fit, cfg.circuit.params())
        if cfg.fit.seed_resonances and len(spec) >= 16:
            fcfg = seed_resonances(spec, fcfg)
        res = fit_circuit(spec, fcfg, Z0=cfg.circuit.Z0)
        converged &= res.converged
        results.append(_circuit_result_json(res, str(path)))
        model = circuit_response(TwoModeCircuit.from_params(res.params, Z0=cfg.circuit.Z0), spec.f_grid)
        write_table_csv(
            args.out / f"overlay_{stem}.csv",
            {"freq_hz": spec.f_grid, "data_mag": spec.magnitude, "model_mag": np.abs(model),
             "data_db": db_magnitude(spec.magnitude), "model_db": db_magnitude(model)},
            {**_provenance(cfg, args), "source": str(path)},
        )
    out = args.out / "fit_circuit.json"
    write_json(out, {**_provenance(cfg, args), "results": results})
    if not converged:
        raise _NotConverged(out)
    return out


def cmd_fit_hybrid(cfg, args) -> Path:
    """Fit coupling strengths to field-sweep maps."""
    paths = _data_paths(cfg, args)
    fixed = cfg.hybrid.build()
    rng = _rng(cfg, args.seed)
    initial = {"g12": fixed.couplings.g12, "g23": fixed.couplings.g23, "g31": fixed.couplings.g31,
               "gyro": fixed.kittel.gyro, "m_eff": fixed.kittel.m_eff}
    maps = [read_grid(p) for p in paths]
    results, converged = [], True
    for path, data in zip(paths, maps):
        if rng is not None:
            data = FieldSweepMap(data.h_grid, data.f_grid, _noisy_magnitude(data.values, cfg.noise.sigma, rng))
        res = fit_hybrid(data, fixed, _fit_config(cfg.fit, initial))
        converged &= res.converged
        model = res.extras["model"]
        p1, p2, mag = model.modes
        gamma_m = mag.linewidth
        coop = {}
        for key, g, photon in (("C1", res.params["g31"], p1), ("C2", res.params["g23"], p2)):
            coop[key] = g * g / (photon.linewidth * gamma_m) if photon.linewidth > 0 and gamma_m > 0 else None
        rep = residual_report(res)
        results.append({
            "source": str(path),
            "params_si": {k: v for k, v in res.params.items()},
            "couplings_mhz": {k: res.params[k] / 1e6 for k in ("g12", "g23", "g31")},
            "stderr_si": res.stderr,
            "free": list(res.free),
            "cooperativity": coop,
            "branch_residuals_hz": res.extras["branch_residuals_hz"],
            "ridge_seed_si": res.extras["ridge_fit"],
            "n_dips": res.extras["n_dips"],
            "windows": res.extras["windows"],
            "objective_kind": res.extras["objective_kind"],
            "objective": res.objective,
            "rms": rep.rms,
            "n_iter": res.n_iter,
            "converged": res.converged,
            "message": res.message,
            "at_bounds": list(res.at_bounds),
            "flags": rep.flags,
            "trace": rep.trace,
        })
    out = args.out / "fit_hybrid.json"
    write_json(out, {**_provenance(cfg, args), "hybrid": cfg.hybrid.model_dump(), "results": results})
    if not converged:
        raise _NotConverged(out)
    return out


def cmd_polarization_report(cfg, args) -> Path:
    """Angular damping curves, critical angles and transition map."""
    model = cfg.angular.build()
    delta = model.delta
    lo, hi = cfg.measured_range_deg
    theta = cfg.theta_grid.values()

    def row(t):
        g1, g2 = gamma_of_angle(model, t)
        return {"theta_deg": float(t), "gamma1_hz": g1, "gamma2_hz": g2,
                "phi": order_parameter(model, t), "extrapolated": not lo <= t <= hi}

    curves = [row(t) for t in theta]
    c1, c2 = critical_angles(delta)
    warnings = []
    if any(r["extrapolated"] for r in curves):
        warnings.append(f"theta grid leaves the measured range [{lo:g}, {hi:g}] deg; "
                        "values outside it are extrapolated")
    if not lo <= c2 <= hi:
        warnings.append(f"second critical angle {c2:.2f} deg lies outside the measured range")
    tmap = transition_map(theta, cfg.delta_grid.values())
    map_path = args.out / "transition_map.csv"
    write_matrix(map_path, {
        **_provenance(cfg, args),
        "theta_grid_deg": tmap.theta_grid.tolist(),
        "delta_grid": tmap.delta_grid.tolist(),
        "rows": "delta, ascending",
        "columns": "theta (deg), ascending",
        "values": "order parameter",
    }, tmap.values)
    out = args.out / "polarization_report.json"
    write_json(out, {
        **_provenance(cfg, args),
        "angular": cfg.angular.model_dump(),
        "delta": delta,
        "critical_angles_deg": [c1, c2],
        "at_angles": [row(t) for t in cfg.report_angles],
        "curves": curves,
        "transition_map": map_path.name,
        "warnings": warnings,
    })
    return out


COMMANDS = {
    "simulate-circuit": cmd_simulate_circuit,
    "simulate-hybrid": cmd_simulate_hybrid,
    "fit-circuit": cmd_fit_circuit,
    "fit-hybrid": cmd_fit_hybrid,
    "polarization-report": cmd_polarization_report,
}


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavimag", description="Two-mode resonator / magnon hybrid models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        p.add_argument("--data", action="append", type=Path, help="input data file (repeatable)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=_positive_int, default=None, help="worker threads for sweeps")
        p.add_argument("--seed", type=_u64, default=None, help="RNG seed for noise injection")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
        out = COMMANDS[args.command](cfg, args)
    except _NotConverged as exc:
        log.error("fit did not converge; results written to %s", exc.args[0])
        return EXIT_NOT_CONVERGED
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (ParseError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except (ModelError, NoRidgeError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        # Remaining value errors come from inconsistent config/data pairings.
        log.error("%s", exc)
        return EXIT_CONFIG
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
