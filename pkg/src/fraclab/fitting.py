"""Least-squares fits of log-log rate data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    n_points: int

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.intercept))

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci95": [self.ci_low, self.ci_high],
            "n_points": self.n_points,
        }


def fit_loglog(x, y, confidence: float = 0.95) -> LogLogFit:
    """Fit ``log y = slope * log x + intercept``.

    The confidence interval on the slope uses the standard OLS standard error
    with a Student t quantile; with two points it degenerates to the slope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if x.size < 2:
        raise ValueError(f"a rate fit needs at least 2 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit requires strictly positive data")
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    dof = x.size - 2
    if dof > 0 and np.isfinite(res.stderr):
        half = stats.t.ppf(0.5 + confidence / 2, dof) * res.stderr
    else:
        half = 0.0
    return LogLogFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        ci_low=float(res.slope - half),
        ci_high=float(res.slope + half),
        n_points=int(x.size),
    )
