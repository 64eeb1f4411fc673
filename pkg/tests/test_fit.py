import math

import numpy as np
import pytest
from conftest import (
    CIRCUIT_BOUNDS,
    circuit_fit_config,
    circuit_spectrum,
    hybrid_fit_config,
    hybrid_map,
)

from cavimag import presets
from cavimag.circuit import circuit_response
from cavimag.core import ModelError
from cavimag.fit import (
    FitConfig,
    NoRidgeError,
    Spectrum,
    extract_resonances,
    fit_circuit,
    fit_hybrid,
    levenberg_marquardt,
    residual_report,
    seed_resonances,
)
from cavimag.hybrid import CouplingSet, field_sweep

PERTURB = {"f1": 1.2, "f2": 0.8, "M1": 1.2, "M2": 0.8, "R1": 0.8, "R2": 1.2}


# -- optimiser ----------------------------------------------------------------

def _rosenbrock(x):
    return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])


def test_lm_solves_rosenbrock_with_monotone_trace():
    res = levenberg_marquardt(_rosenbrock, [-1.2, 1.0], [-5, -5], [5, 5])
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-8)
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


def test_lm_respects_bounds():
    res = levenberg_marquardt(_rosenbrock, [0.2, 0.2], [-5, -5], [0.5, 5])
    assert res.x[0] <= 0.5
    assert res.x[0] == pytest.approx(0.5, abs=1e-10)


def test_lm_rejects_failing_trial_steps():
    def fun(x):
        if x[0] > 2.0:
            raise ModelError("outside model domain")
        return np.array([x[0] - 3.0])

    res = levenberg_marquardt(fun, [0.0], [-10], [10])
    assert res.x[0] <= 2.0
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


def test_lm_initial_point_must_be_feasible():
    with pytest.raises(ValueError):
        levenberg_marquardt(_rosenbrock, [6.0, 0.0], [-5, -5], [5, 5])
    with pytest.raises(ModelError):
        levenberg_marquardt(lambda x: (_ for _ in ()).throw(ModelError("bad")), [0.0], [-1], [1])


def test_lm_max_iter_zero_is_not_converged():
    res = levenberg_marquardt(_rosenbrock, [-1.2, 1.0], [-5, -5], [5, 5], max_iter=0)
    assert not res.converged and res.n_iter == 0
    np.testing.assert_array_equal(res.x, [-1.2, 1.0])


# -- resonance extraction -----------------------------------------------------

def test_extract_resonances_flat_trace():
    assert extract_resonances(Spectrum(np.linspace(1e9, 2e9, 50), np.ones(50))) == []


def test_extract_resonances_single_mode():
    dips = extract_resonances(circuit_spectrum(0))
    assert len(dips) == 1
    assert abs(dips[0].f0 - 3.935e9) < 5e6
    assert dips[0].hwhm > 0 and 0 < dips[0].depth < 1


def test_extract_resonances_two_modes():
    dips = extract_resonances(circuit_spectrum(30))
    assert len(dips) == 2
    # Dips sit near the bare resonances, pulled by the loading of the line.
    assert abs(dips[0].f0 - 3.7557e9) < 5e6
    assert abs(dips[1].f0 - 5.6778e9) < 5e6


def test_extract_resonances_needs_sixteen_points():
    with pytest.raises(ValueError, match="16"):
        extract_resonances(Spectrum(np.linspace(1e9, 2e9, 15), np.ones(15)))


def test_seeding_keeps_mode_labels_when_guesses_cross():
    _, cfg = circuit_fit_config(60, {"f1": 1.25, "f2": 0.8})
    seeded = seed_resonances(circuit_spectrum(60), cfg)
    assert seeded.initial["f1"] < seeded.initial["f2"]
    assert abs(seeded.initial["f1"] - presets.circuit_params(60)["f1"]) < 5e6


def test_seeding_with_one_dip_moves_the_nearest_mode_only():
    truth, cfg = circuit_fit_config(0, {"f2": 1.1}, free=("f1", "f2", "M1", "M2"))
    cfg = FitConfig(**{**cfg.__dict__, "free": ("f1", "f2", "M1", "M2")})
    seeded = seed_resonances(circuit_spectrum(0), cfg)
    assert abs(seeded.initial["f1"] - 3.935e9) < 5e6
    assert seeded.initial["f2"] == cfg.initial["f2"]


# -- stage 1 ------------------------------------------------------------------

@pytest.mark.parametrize("theta", presets.ANGLES)
def test_circuit_round_trip(theta):
    truth, cfg = circuit_fit_config(theta, PERTURB)
    spec = circuit_spectrum(theta)
    res = fit_circuit(spec, seed_resonances(spec, cfg))
    assert res.converged
    for name in cfg.free:
        if truth[name] == 0:
            assert res.params[name] < 1e-3 * 1e-9
        else:
            assert res.params[name] == pytest.approx(truth[name], rel=0.01)
    assert residual_report(res).rms < 1e-6


def test_circuit_fit_on_decoupled_line():
    base = presets.circuit(30).to_params()
    base.update(M1=0.0, M2=0.0)
    from cavimag.circuit import TwoModeCircuit

    f = np.linspace(3.4e9, 6.1e9, 541)
    spec = Spectrum(f, circuit_response(TwoModeCircuit.from_params(base), f))
    init = {**base, "M1": 0.2e-9, "M2": 0.2e-9}
    lo, hi = CIRCUIT_BOUNDS
    cfg = FitConfig(free=("M1", "M2"), initial=init, lower=lo, upper=hi)
    res = fit_circuit(spec, cfg)
    assert res.params["M1"] < 1e-3 * 1e-9 and res.params["M2"] < 1e-3 * 1e-9


def test_circuit_fit_theta90_pins_m1():
    truth, cfg = circuit_fit_config(90, PERTURB)
    spec = circuit_spectrum(90)
    res = fit_circuit(spec, seed_resonances(spec, cfg))
    assert res.params["M1"] == pytest.approx(0.0, abs=1e-15)
    assert "M1" in res.at_bounds


def test_dark_mode_is_flagged_when_f_and_r_stay_free():
    truth = presets.circuit(90).to_params()
    lo, hi = CIRCUIT_BOUNDS
    init = {**truth, "M1": 0.1e-9}
    cfg = FitConfig(free=("f1", "M1", "R1"), initial=init, lower=lo, upper=hi)
    res = fit_circuit(circuit_spectrum(90, 541), cfg)
    assert any("mode 1 is dark" in f for f in res.flags)


def test_circuit_fit_is_deterministic_and_within_bounds():
    truth, cfg = circuit_fit_config(30, PERTURB)
    spec = circuit_spectrum(30, 901)
    a = fit_circuit(spec, cfg)
    b = fit_circuit(spec, cfg)
    assert a.params == b.params and a.trace == b.trace
    np.testing.assert_array_equal(a.residuals, b.residuals)
    for name in cfg.free:
        lo, hi = cfg.bounds(name)
        assert lo <= a.params[name] <= hi
    assert all(y <= x for x, y in zip(a.trace, a.trace[1:]))


def test_circuit_fit_complex_residuals():
    truth, cfg = circuit_fit_config(30, {"M1": 1.1, "R2": 0.9}, free=("M1", "R2"))
    cfg = FitConfig(**{**cfg.__dict__, "complex_residuals": True})
    res = fit_circuit(circuit_spectrum(30, 901), cfg)
    assert res.residuals.size == 2 * 901
    assert res.params["M1"] == pytest.approx(truth["M1"], rel=1e-6)
    mag = Spectrum(np.linspace(1e9, 2e9, 20), np.ones(20), magnitude_only=True)
    with pytest.raises(ValueError, match="phase"):
        fit_circuit(mag, cfg)


def test_circuit_fit_non_convergence_is_flagged():
    truth, cfg = circuit_fit_config(30, PERTURB)
    cfg = FitConfig(**{**cfg.__dict__, "max_iter": 1})
    res = fit_circuit(circuit_spectrum(30, 901), cfg)
    assert not res.converged and "non-converged" in res.flags
    rep = residual_report(res)
    assert rep.non_converged and "non-converged" in rep.flags
    assert rep.objective == res.objective == res.trace[-1]


def test_config_rejects_bad_setups():
    with pytest.raises(ValueError, match="outside bounds"):
        FitConfig(free=("a",), initial={"a": 2.0}, upper={"a": 1.0})
    with pytest.raises(ValueError):
        FitConfig(free=("a",), initial={})
    with pytest.raises(ValueError):
        FitConfig(free=(), initial={}, gtol=0.0)


# -- stage 2 ------------------------------------------------------------------

def test_hybrid_round_trip_theta30():
    truth, cfg = hybrid_fit_config(30, {"g31": 1.2, "g23": 0.8})
    res = fit_hybrid(hybrid_map(30, 8.0, 2e6), presets.hybrid(30), cfg)
    assert res.params["g31"] == pytest.approx(80e6, rel=0.02)
    assert res.params["g23"] == pytest.approx(76e6, rel=0.02)
    assert not res.flags
    assert residual_report(res).rms < 1e-6


def test_hybrid_fit_without_couplings():
    p = presets.hybrid(30)
    from dataclasses import replace

    p0 = replace(p, couplings=CouplingSet())
    m = field_sweep(p0, np.arange(600.0, 1600.0, 8.0), np.arange(3.4e9, 6.1e9, 2e6))
    cfg = FitConfig(free=("g31", "g23"), initial={"g31": 20e6, "g23": 20e6},
                    lower={"g31": 0.0, "g23": 0.0}, upper={"g31": 5e8, "g23": 5e8})
    res = fit_hybrid(m, p0, cfg)
    assert res.params["g31"] < 1e6 and res.params["g23"] < 1e6


def test_hybrid_theta0_mode2_channel_is_dark():
    truth, cfg = hybrid_fit_config(0, {"g31": 0.8})
    res = fit_hybrid(hybrid_map(0, 8.0, 2e6), presets.hybrid(0), cfg)
    assert res.params["g23"] == 0.0
    assert any(f.startswith("g23 unconstrained") for f in res.flags)
    assert res.params["g31"] == pytest.approx(56.5e6, rel=0.02)


def test_hybrid_fit_reports_ridge_seed_and_residuals():
    truth, cfg = hybrid_fit_config(60, {"g31": 0.85, "g23": 1.15})
    res = fit_hybrid(hybrid_map(60, 8.0, 2e6), presets.hybrid(60), cfg)
    assert set(res.extras["ridge_fit"]) == {"g31", "g23"}
    assert res.extras["n_dips"] > 0
    assert all(v >= 0 for v in res.extras["branch_residuals_hz"].values())
    assert res.params["g23"] == pytest.approx(50e6, rel=0.02)


def test_hybrid_ridge_objective_is_available():
    truth, cfg = hybrid_fit_config(0, {"g31": 0.8}, free=("g31",))
    cfg = FitConfig(**{**cfg.__dict__, "objective": "ridge"})
    res = fit_hybrid(hybrid_map(0, 8.0, 2e6), presets.hybrid(0), cfg)
    assert res.extras["objective_kind"] == "ridge"
    assert res.params["g31"] == pytest.approx(56.5e6, rel=0.02)


def test_hybrid_fit_without_ridges_names_windows():
    p = presets.hybrid(30)
    m = field_sweep(p, np.arange(600.0, 700.0, 10.0), np.arange(4.5e9, 5.0e9, 5e6))
    _, cfg = hybrid_fit_config(30, {})
    with pytest.raises(NoRidgeError, match="photon-1 window"):
        fit_hybrid(m, p, cfg)


def test_hybrid_fit_rejects_unknown_parameter():
    cfg = FitConfig(free=("kappa",), initial={"kappa": 1.0})
    with pytest.raises(ValueError, match="unknown"):
        fit_hybrid(hybrid_map(0, 8.0, 2e6), presets.hybrid(0), cfg)


# -- reports ------------------------------------------------------------------

def test_residual_report_of_perfect_fit():
    truth = presets.circuit(30).to_params()
    cfg = FitConfig(free=(), initial=truth)
    res = fit_circuit(circuit_spectrum(30, 301), cfg)
    rep = residual_report(res)
    assert rep.rms == 0.0 and res.n_iter == 0 and rep.converged
    d = rep.to_dict()
    assert d["rms"] == 0.0 and len(d["residuals"]) == 301
    assert "rms" in rep.format()


def test_residual_report_parameter_table():
    truth, cfg = circuit_fit_config(30, PERTURB)
    spec = circuit_spectrum(30, 901)
    rep = residual_report(fit_circuit(spec, seed_resonances(spec, cfg)))
    rows = {p.name: p for p in rep.parameters}
    assert set(cfg.free) <= set(rows)
    assert all(rows[n].free for n in cfg.free)
    assert all(math.isfinite(rows[n].stderr) for n in ("f1", "f2", "M1"))
