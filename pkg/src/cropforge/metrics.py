"""Evaluation metrics and probabilistic-calibration diagnostics.

All metrics return fractions (0.10, not 10%); callers format percentages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PairedSeries:
    """Predicted values against observed (measured) values."""

    predicted: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=float)
        self.observed = np.asarray(self.observed, dtype=float)
        if self.predicted.shape != self.observed.shape or self.predicted.ndim != 1:
            raise ValueError("predicted and observed must be 1-d and equal length")
        if self.predicted.size == 0:
            raise ValueError("empty series")
        if not (np.isfinite(self.predicted).all() and np.isfinite(self.observed).all()):
            raise ValueError("non-finite values in series")


@dataclass
class ReliabilityCurve:
    """(nominal level, empirical coverage) pairs for a forecast set."""

    points: list[tuple[float, float]]

    def __post_init__(self):
        nominal = [p for p, _ in self.points]
        if any(b <= a for a, b in zip(nominal, nominal[1:])):
            raise ValueError("nominal levels must be strictly increasing")
        if any(not 0.0 <= c <= 1.0 for _, c in self.points):
            raise ValueError("coverage outside [0, 1]")


def pearson(series: PairedSeries) -> float:
    """Product-moment correlation cov(S, O) / (sigma_S * sigma_O)."""
    s, o = series.predicted, series.observed
    if s.size < 2:
        raise ValueError("correlation needs at least 2 points")
    ds, do = s - s.mean(), o - o.mean()
    var_s, var_o = float(ds @ ds), float(do @ do)
    if var_s == 0.0 or var_o == 0.0:
        raise ValueError("undefined correlation: zero variance")
    return float(ds @ do) / math.sqrt(var_s * var_o)


def mape(series: PairedSeries) -> float:
    """(1/n) * sum |s_i - o_i| / o_i."""
    s, o = series.predicted, series.observed
    if (o <= 0).any():
        raise ValueError("MAPE requires all observed values > 0")
    return float(np.mean(np.abs(s - o) / o))


def prmse(series: PairedSeries) -> float:
    """sqrt(mean squared error) / mean(observed)."""
    s, o = series.predicted, series.observed
    obar = float(o.mean())
    if obar <= 0:
        raise ValueError("PRMSE requires mean observed value > 0")
    return math.sqrt(float(np.mean((s - o) ** 2))) / obar


def r_squared(series: PairedSeries) -> float:
    """1 - SS_res / SS_tot."""
    s, o = series.predicted, series.observed
    do = o - o.mean()
    ss_tot = float(do @ do)
    if ss_tot == 0.0:
        raise ValueError("undefined R^2: zero observed variance")
    ss_res = float(np.sum((s - o) ** 2))
    return 1.0 - ss_res / ss_tot


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Rational-approximation coefficients for the standard normal quantile
# (Acklam's minimax fit), refined below by one Halley step.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level {p} outside (0, 1)")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # One Halley refinement step against the exact (erfc-based) CDF.
    e = normal_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def reliability_curve(forecasts: list[tuple[float, float]], observed,
                      levels: list[float]) -> ReliabilityCurve:
    """Empirical coverage of forecast quantiles at each nominal level.

    Coverage at level p is the fraction of observations y_i with
    y_i <= mu_i + sigma_i * Phi^-1(p); ties count as covered.
    """
    observed = np.asarray(observed, dtype=float)
    if len(forecasts) != observed.size or observed.size == 0:
        raise ValueError("forecasts and observations must align and be non-empty")
    mu = np.array([m for m, _ in forecasts], dtype=float)
    sigma = np.array([s for _, s in forecasts], dtype=float)
    if (sigma <= 0).any():
        raise ValueError("forecast sigma must be > 0")
    if any(not 0.0 < p < 1.0 for p in levels):
        raise ValueError("levels must lie in (0, 1)")
    points = []
    for p in levels:
        quantiles = mu + sigma * normal_quantile(p)
        coverage = float(np.mean(observed <= quantiles))
        points.append((float(p), coverage))
    return ReliabilityCurve(points=points)
