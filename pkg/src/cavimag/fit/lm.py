"""Bound-constrained Levenberg-Marquardt with a finite-difference Jacobian.

Parameters are optimised in scaled coordinates ``z = x / scale`` so that
quantities of very different magnitude (pF next to GHz) are conditioned
alike.  Bounds are handled by projection plus an active set: a parameter
sitting on a bound whose gradient points outward is frozen for that
iteration.  A trial point where the model raises :class:`ModelError` or
returns non-finite residuals is treated as a rejected step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import ModelError


@dataclass
class LMResult:
    x: np.ndarray
    cost: float  # sum of squared residuals
    residuals: np.ndarray
    jacobian: np.ndarray | None
    n_iter: int
    n_eval: int
    converged: bool
    message: str
    trace: list[float] = field(default_factory=list)
    stderr: np.ndarray | None = None


def _evaluate(fun, x):
    try:
        r = np.asarray(fun(x), dtype=float)
    except ModelError:
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def numeric_jacobian(fun, x, r0, lower, upper, scale, rel_step=1e-6):
    """Central-difference Jacobian, one-sided next to a bound."""
    m, n = r0.size, x.size
    J = np.empty((m, n))
    for j in range(n):
        h = rel_step * max(abs(x[j]), scale[j])
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fwd = xp[j] <= upper[j]
        bwd = xm[j] >= lower[j]
        rp = _evaluate(fun, xp) if fwd else None
        rm = _evaluate(fun, xm) if bwd else None
        if rp is not None and rm is not None:
            J[:, j] = (rp - rm) / (2 * h)
        elif rp is not None:
            J[:, j] = (rp - r0) / h
        elif rm is not None:
            J[:, j] = (r0 - rm) / h
        else:
            raise ModelError(f"cannot differentiate model in parameter {j}")
    return J


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    x0,
    lower,
    upper,
    *,
    scale=None,
    ftol: float = 1e-12,
    xtol: float = 1e-10,
    gtol: float = 1e-10,
    max_iter: int = 200,
    rel_step: float = 1e-6,
) -> LMResult:
    """Minimise ``sum(fun(x)**2)`` subject to ``lower <= x <= upper``."""
    x = np.array(x0, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape).copy()
    if np.any(x < lower) or np.any(x > upper):
        raise ValueError("initial point violates bounds")
    if scale is None:
        scale = np.where(x != 0, np.abs(x), 1.0)
    scale = np.asarray(scale, dtype=float)

    r = _evaluate(fun, x)
    if r is None:
        raise ModelError("model cannot be evaluated at the initial point")
    cost = float(r @ r)
    trace = [cost]
    n_eval = 1

    if x.size == 0:
        return LMResult(x, cost, r, None, 0, 1, True, "no free parameters", trace)

    mu = None
    nu = 2.0
    converged = False
    message = "maximum number of iterations reached"
    J = None
    it = 0
    while it < max_iter:
        it += 1
        J = numeric_jacobian(fun, x, r, lower, upper, scale, rel_step)
        n_eval += 2 * x.size
        Js = J * scale
        g = Js.T @ r

        at_lo = (x <= lower) & (g > 0)
        at_hi = (x >= upper) & (g < 0)
        free = ~(at_lo | at_hi)

        if cost == 0.0:
            converged, message = True, "exact fit"
            break
        col_norm = np.linalg.norm(Js, axis=0)
        rn = np.sqrt(cost)
        with np.errstate(divide="ignore", invalid="ignore"):
            cosines = np.where(col_norm > 0, np.abs(g) / (col_norm * rn), 0.0)
        if not np.any(free) or np.max(cosines[free]) <= gtol:
            converged, message = True, "gradient tolerance reached"
            break

        A = Js[:, free].T @ Js[:, free]
        gf = g[free]
        diag = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
        if mu is None:
            mu = 1e-3

        accepted = False
        while True:
            try:
                step_f = np.linalg.solve(A + mu * np.diag(diag), -gf)
            except np.linalg.LinAlgError:
                step_f = np.linalg.lstsq(A + mu * np.diag(diag), -gf, rcond=None)[0]
            step = np.zeros_like(x)
            step[free] = step_f
            x_new = np.clip(x + step * scale, lower, upper)
            dz = (x_new - x) / scale
            z_norm = np.linalg.norm(x / scale)
            if np.linalg.norm(dz) <= xtol * (z_norm + xtol):
                converged, message = True, "step tolerance reached"
                break
            r_new = _evaluate(fun, x_new)
            n_eval += 1
            cost_new = float(r_new @ r_new) if r_new is not None else np.inf
            # Predicted reduction of the linear model for the projected step.
            lin = r + Js @ dz
            pred = cost - float(lin @ lin)
            actual = cost - cost_new
            if r_new is not None and actual > 0:
                rho = actual / pred if pred > 0 else 1.0
                mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                x, r, prev_cost, cost = x_new, r_new, cost, cost_new
                trace.append(cost)
                accepted = True
                if actual <= ftol * prev_cost:
                    converged, message = True, "objective tolerance reached"
                break
            mu *= nu
            nu *= 2.0
            if nu > 2.0**60:
                converged, message = True, "no further decrease possible"
                break
        if converged or not accepted:
            break

    stderr = None
    if it > 0:
        J = numeric_jacobian(fun, x, r, lower, upper, scale, rel_step)
        n_eval += 2 * x.size
        Js = J * scale
        dof = max(r.size - x.size, 1)
        cov = np.linalg.pinv(Js.T @ Js) * (cost / dof)
        stderr = np.sqrt(np.clip(np.diag(cov), 0, None)) * scale
    return LMResult(x, cost, r, J, it, n_eval, converged, message, trace, stderr)
