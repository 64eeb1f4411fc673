import functools

import numpy as np
import pytest

from cavimag import presets
from cavimag.hybrid import field_sweep

MHZ = 1e6
GHZ = 1e9


@functools.lru_cache(maxsize=None)
def hybrid_map(theta: int, h_step: float = 4.0, f_step: float = 1e6):
    """Noiseless |S21| map for a tabulated angle (cached across tests)."""
    h = np.arange(600.0, 1600.0 + h_step / 2, h_step)
    f = np.arange(3.4e9, 6.1e9 + f_step / 2, f_step)
    return field_sweep(presets.hybrid(theta), h, f, metadata={"theta_deg": theta})


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    return out


CIRCUIT_FREE = ("f1", "f2", "M1", "M2", "R1", "R2")
CIRCUIT_BOUNDS = (
    {"f1": 2.5e9, "f2": 4.0e9, "M1": 0.0, "M2": 0.0, "R1": 0.0, "R2": 0.0},
    {"f1": 5.0e9, "f2": 7.0e9, "M1": 2e-9, "M2": 2e-9, "R1": 10.0, "R2": 10.0},
)


def circuit_spectrum(theta: int, n: int = 2701):
    from cavimag.circuit import circuit_response
    from cavimag.fit import Spectrum

    f = np.linspace(3.4e9, 6.1e9, n)
    return Spectrum(f, circuit_response(presets.circuit(theta), f))


def circuit_fit_config(theta: int, factors: dict[str, float], free=CIRCUIT_FREE):
    """Truth scaled by ``factors``; modes with M = 0 lose f and R from the free set."""
    from cavimag.fit import FitConfig

    truth = presets.circuit(theta).to_params()
    free = tuple(n for n in free
                 if not (n[0] in "fR" and truth[f"M{n[1]}"] == 0.0))
    initial = {k: v * factors.get(k, 1.0) for k, v in truth.items()}
    lo, hi = CIRCUIT_BOUNDS
    for k in initial:
        if k in lo:
            initial[k] = min(max(initial[k], lo[k]), hi[k])
    return truth, FitConfig(free=free, initial=initial, lower=dict(lo), upper=dict(hi))


def hybrid_fit_config(theta: int, factors: dict[str, float], free=("g31", "g23")):
    """Couplings scaled by ``factors``; a free zero coupling starts at 10 MHz."""
    from cavimag.fit import FitConfig

    c = presets.hybrid(theta).couplings
    truth = {"g12": c.g12, "g23": c.g23, "g31": c.g31}
    initial = {k: (v * factors.get(k, 1.0) if v or k not in free else 10e6) for k, v in truth.items()}
    return truth, FitConfig(free=free, initial=initial, lower={n: 0.0 for n in free},
                            upper={n: 5e8 for n in free})


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}
ACCEPTANCE_TITLES = {
    1: "cooperativity reproduction",
    2: "critical angles",
    3: "angular damping projection",
    4: "intrinsic damping cross-check",
    5: "circuit dip positions",
    6: "anticrossing splitting",
    7: "single-mode S21 reduction",
    8: "passivity and reciprocity",
    9: "round-trip fitting",
    10: "Kittel consistency",
}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Log one checked part of an acceptance criterion and return ``ok``."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_TITLES):
        parts = ACCEPTANCE.get(n)
        if not parts:
            tr.write_line(f"criterion {n:2d} ({ACCEPTANCE_TITLES[n]}): NOT RUN")
            continue
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        tr.write_line(f"criterion {n:2d} ({ACCEPTANCE_TITLES[n]}): {'PASS' if ok else 'FAIL'}: {detail}")
