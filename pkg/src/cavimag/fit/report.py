"""Human- and machine-readable summaries of a finished fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import FitResult


@dataclass
class ParameterRow:
    name: str
    value: float
    stderr: float
    free: bool
    at_bound: bool


@dataclass
class ResidualReport:
    residuals: np.ndarray
    rms: float
    max_abs: float
    objective: float
    parameters: list[ParameterRow]
    trace: list[float]
    n_iter: int
    converged: bool
    flags: list[str] = field(default_factory=list)
    message: str = ""

    @property
    def non_converged(self) -> bool:
        return not self.converged

    def to_dict(self) -> dict:
        return {
            "rms": self.rms,
            "max_abs_residual": self.max_abs,
            "objective": self.objective,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "non_converged": self.non_converged,
            "message": self.message,
            "flags": list(self.flags),
            "parameters": [
                {"name": p.name, "value": p.value, "stderr": None if math.isnan(p.stderr) else p.stderr,
                 "free": p.free, "at_bound": p.at_bound}
                for p in self.parameters
            ],
            "trace": list(self.trace),
            "residuals": self.residuals.tolist(),
        }

    def format(self) -> str:
        lines = [
            f"objective {self.objective:.6g}  rms {self.rms:.6g}  iterations {self.n_iter}  "
            + ("converged" if self.converged else "NON-CONVERGED"),
        ]
        for p in self.parameters:
            err = "" if math.isnan(p.stderr) else f" +/- {p.stderr:.3g}"
            tag = "" if p.free else "  (fixed)"
            if p.at_bound:
                tag += "  (at bound)"
            lines.append(f"  {p.name:>6} = {p.value:.8g}{err}{tag}")
        lines.extend(f"  ! {f}" for f in self.flags)
        return "\n".join(lines)


def residual_report(result: FitResult) -> ResidualReport:
    """Summarise residuals, parameter uncertainties and the convergence trace."""
    r = np.asarray(result.residuals, dtype=float)
    rows = [
        ParameterRow(
            name=name,
            value=float(value),
            stderr=float(result.stderr.get(name, math.nan)) if name in result.free else math.nan,
            free=name in result.free,
            at_bound=name in result.at_bounds,
        )
        for name, value in result.params.items()
    ]
    flags = list(result.flags)
    if not result.converged and "non-converged" not in flags:
        flags.append("non-converged")
    return ResidualReport(
        residuals=r,
        rms=result.rms,
        max_abs=float(np.max(np.abs(r))) if r.size else 0.0,
        objective=float(result.objective),
        parameters=rows,
        trace=list(result.trace),
        n_iter=result.n_iter,
        converged=result.converged,
        flags=flags,
        message=result.message,
    )
