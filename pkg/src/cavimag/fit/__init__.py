"""Two-stage parameter extraction."""

from .data import FitConfig, FitResult, Spectrum
from .lm import LMResult, levenberg_marquardt
from .report import ResidualReport, residual_report
from .stage1 import Resonance, circuit_model, extract_resonances, fit_circuit, seed_resonances
from .stage2 import NoRidgeError, fit_hybrid

__all__ = [
    "FitConfig", "FitResult", "Spectrum", "LMResult", "levenberg_marquardt", "ResidualReport",
    "residual_report", "Resonance", "circuit_model", "extract_resonances", "fit_circuit",
    "seed_resonances", "NoRidgeError", "fit_hybrid",
]
