"""Trend diagnostics for partial-sum series.

Finite data cannot certify that a series is O(1); the honest surrogate used
throughout is: bounded running maximum plus a least-squares slope against
log n below a configured threshold.  Slopes are fitted separately to real
and imaginary parts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDED = "bounded-trend"
GROWING = "growing"


def lsq_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of y against x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return 0.0
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        return 0.0
    return float(xc @ (y - y.mean())) / denom


@dataclass
class TrendReport:
    """Max magnitude and slope-vs-abscissa of a series, with a verdict."""

    max_abs: float
    slope_re: float
    slope_im: float
    threshold: float
    verdict: str

    @property
    def slope(self) -> float:
        return max(abs(self.slope_re), abs(self.slope_im))


def trend_report(x, values, threshold: float) -> TrendReport:
    values = np.asarray(values)
    s_re = lsq_slope(x, values.real)
    s_im = lsq_slope(x, values.imag) if np.iscomplexobj(values) else 0.0
    slope = max(abs(s_re), abs(s_im))
    return TrendReport(
        max_abs=float(np.abs(values).max()) if len(np.atleast_1d(values)) else 0.0,
        slope_re=s_re,
        slope_im=s_im,
        threshold=threshold,
        verdict=BOUNDED if slope <= threshold else GROWING,
    )


def log_trend_report(n_grid, values, threshold: float) -> TrendReport:
    """Trend against log n (the O(1)-vs-log-divergence discriminator)."""
    n = np.asarray([float(v) for v in n_grid])
    return trend_report(np.log(n), values, threshold)
