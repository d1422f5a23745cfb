"""Marginal intensities, tail integrals and regular-variation diagnostics.

Both quantities come from the scale-mixture identity nu_j(A) = E[nu*(A / S_j)]:

    f_j(s) = int z**-1 h_j(s/z) rho(dz) = E[rho(s / S) / S]
    U_j(y) = E[U*(y / S_j)]

and are integrated over the score variable, where the score density supplies
all the structure the quadrature needs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import DirectingMeasure, MarginalScore
from .errors import DegenerateGrid, DivergentIntensity
from .quad import IntegralResult, QuadConfig, integrate, _loglog_slope


def marginal_density_result(score_j: MarginalScore, directing: DirectingMeasure, s: float, config: QuadConfig | None = None) -> IntegralResult:
    if not s > 0:
        raise ValueError("s must be positive")

    def f(u):
        return score_j.pdf(u) * directing.density(s / u) / u

    return integrate(f, 0.0, score_j.support_upper, config, points=score_j.hints())


def marginal_density(score_j: MarginalScore, directing: DirectingMeasure, s: float, config: QuadConfig | None = None) -> float:
    res = marginal_density_result(score_j, directing, s, config)
    if not res.converged:
        raise DivergentIntensity(f"marginal density at s={s!r}: {res.verdict.value}")
    return res.value


def marginal_tail_result(score_j: MarginalScore, directing: DirectingMeasure, y: float, config: QuadConfig | None = None) -> IntegralResult:
    if not y > 0:
        raise ValueError("y must be positive")

    def f(u):
        with np.errstate(divide="ignore"):
            return score_j.pdf(u) * directing.tail(y / u)

    return integrate(f, 0.0, score_j.support_upper, config, points=score_j.hints())


def marginal_tail(score_j: MarginalScore, directing: DirectingMeasure, y: float, config: QuadConfig | None = None) -> float:
    res = marginal_tail_result(score_j, directing, y, config)
    if not res.converged:
        raise DivergentIntensity(f"marginal tail at y={y!r}: {res.verdict.value}")
    return res.value


@dataclass(frozen=True)
class MarginalIntensity:
    """Evaluable marginal Levy density and tail integral of coordinate j."""

    j: int
    score: MarginalScore
    directing: DirectingMeasure
    config: QuadConfig | None = None

    def density(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.array([marginal_density(self.score, self.directing, v, self.config) for v in s])

    def tail(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.array([marginal_tail(self.score, self.directing, v, self.config) for v in y])


@dataclass
class RvDiagnostic:
    sigma_hat: float
    residual: float
    slope_drift: float
    ratio_table: list[tuple[float, float, float]]
    regularly_varying: bool

    @property
    def verdict(self) -> str:
        return f"RegularlyVarying({self.sigma_hat:.4f})" if self.regularly_varying else "NotDetected"

    def to_dict(self) -> dict:
        return {
            "sigma_hat": self.sigma_hat,
            "residual": self.residual,
            "slope_drift": self.slope_drift,
            "ratio_table": [{"a": a, "t": t, "ratio": r} for a, t, r in self.ratio_table],
            "verdict": self.verdict,
        }


def default_grid(lo: float = 1e-6, hi: float = 1e-1, n: int = 50) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


def estimate_rv_index(
    tail_fn: Callable[[float], float],
    y_grid: Sequence[float],
    *,
    fit_points: int = 20,
    ratios: Sequence[float] = (2.0, 5.0),
    ratio_tol: float = 0.05,
    sigma_floor: float = 0.05,
    drift_tol: float = 0.2,
) -> RvDiagnostic:
    """Index of regular variation of a tail integral as y -> 0.

    sigma_hat is minus the log-log slope over the `fit_points` smallest grid
    points.  The slowly varying part l(t) = U(1/t) t**-sigma_hat is then probed
    with l(a t) / l(t) at the three largest t.  Indices below `sigma_floor`, or
    a local slope that drifts by more than `drift_tol` * sigma_hat across the fit
    window, are reported as NotDetected.
    """
    y = np.sort(np.asarray(y_grid, dtype=float))
    if y.size < 3 or np.any(y <= 0) or y[-1] / y[0] < 1e3:
        raise DegenerateGrid("need at least 3 positive grid points spanning 3 decades")
    ys = y[: min(fit_points, y.size)]
    if ys.size < 3:
        raise DegenerateGrid("fit window too small")
    u = np.array([float(tail_fn(v)) for v in ys])
    if np.any(~np.isfinite(u)) or np.any(u <= 0):
        raise DegenerateGrid("tail function must be positive and finite on the grid")
    slope, resid = _loglog_slope(ys, u)
    sigma_hat = -slope
    half = ys.size // 2
    s1, _ = _loglog_slope(ys[:half + 1], u[:half + 1])
    s2, _ = _loglog_slope(ys[half:], u[half:])
    drift = abs(s1 - s2)

    def ell(t):
        return float(tail_fn(1.0 / t)) * t ** (-sigma_hat)

    table = []
    for yy in ys[:3]:
        t = 1.0 / yy
        base = ell(t)
        for a in ratios:
            table.append((float(a), float(t), float(ell(a * t) / base)))
    ratio_ok = all(abs(r - 1.0) <= ratio_tol for *_, r in table)
    rv = ratio_ok and sigma_hat >= sigma_floor and drift <= drift_tol * sigma_hat
    return RvDiagnostic(float(sigma_hat), resid, float(drift), table, bool(rv))


@dataclass
class Theorem3Report:
    sigma: float
    diagnostic: RvDiagnostic
    factor_estimate: float
    expected_factor: float | None
    passed: bool
    tolerance: float
    table: list[tuple[float, float, float, float]] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "diagnostic": self.diagnostic.to_dict(),
            "factor_estimate": self.factor_estimate,
            "expected_factor": self.expected_factor,
            "passed": self.passed,
            "tolerance": self.tolerance,
        }


def tail_table(score_j: MarginalScore, directing: DirectingMeasure, y_grid, config: QuadConfig | None = None):
    """Rows (y, U_star, U_j, U_j / U_star) on the grid."""
    rows = []
    for y in np.asarray(y_grid, dtype=float):
        us = float(directing.tail(y))
        uj = marginal_tail(score_j, directing, float(y), config)
        rows.append((float(y), us, uj, uj / us))
    return rows


def verify_theorem3(
    score_j: MarginalScore,
    directing: DirectingMeasure,
    y_grid=None,
    config: QuadConfig | None = None,
    *,
    tol: float = 0.02,
) -> Theorem3Report:
    """Check that the marginal tail keeps the directing measure's index of regular variation."""
    grid = default_grid() if y_grid is None else np.asarray(y_grid, dtype=float)
    table = tail_table(score_j, directing, grid, config)
    lookup = {row[0]: row[2] for row in table}

    def tail_fn(y):
        if y in lookup:
            return lookup[y]
        return marginal_tail(score_j, directing, y, config)

    diag = estimate_rv_index(tail_fn, grid)
    sigma = directing.rv_index
    expected = score_j.fractional_moment(sigma) if sigma > 0 else None
    factor = table[0][3]
    if sigma > 0:
        passed = diag.regularly_varying and abs(diag.sigma_hat - sigma) <= tol
    else:
        passed = not diag.regularly_varying
    return Theorem3Report(sigma, diag, factor, expected, bool(passed), tol, table)


def write_tail_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "U_star", "U_j", "ratio"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
