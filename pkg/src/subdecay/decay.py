"""Decay-rate estimation from norm time-series.

Two diagnostics: the pointwise ratio log(value)/log(t), which converges to
the decay power but carries an O(log c / log t) offset from the prefactor,
and a windowed least-squares line through (log t, log value), which removes
the prefactor and is the statistic used by the acceptance runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class NormSeries:
    """A sampled time series over strictly increasing times.

    Holds norm histories (nonnegative values) as well as derived series such
    as the pointwise exponent ratio, so no sign constraint is imposed here;
    the fitting operations validate positivity where they need it.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.ndim != 1 or times.size != values.size:
            raise DomainError("times and values must be 1-D and equally long")
        if times.size and np.any(np.diff(times) <= 0.0):
            raise DomainError("times must be strictly increasing")


@dataclass(frozen=True)
class DecayFit:
    """Fitted power law value ~ exp(intercept) * t**exponent on a window."""

    window: tuple[float, float]
    exponent: float
    intercept: float
    rms_residual: float
    n_samples: int

    def __post_init__(self):
        lo, hi = self.window
        if not (lo >= 1.0 and hi > lo):
            raise DomainError(f"fit window must satisfy 1 <= lo < hi, got {self.window}")
        if self.n_samples < 10:
            raise DomainError(f"fit needs >= 10 samples, got {self.n_samples}")


def pointwise_exponent(series: NormSeries) -> NormSeries:
    """log(value)/log(t) at each sample (natural logs; ratio is base-free)."""
    if np.any(series.times <= 1.0):
        raise DomainError("pointwise exponent needs all times > 1")
    if np.any(series.values <= 0.0):
        raise DomainError("pointwise exponent needs strictly positive values")
    return NormSeries(series.times, np.log(series.values) / np.log(series.times))


def fit_exponent(series: NormSeries, window: tuple[float, float]) -> DecayFit:
    """Least-squares line through (log t, log value) restricted to window.

    The slope is the decay exponent; the rms residual diagnoses whether a
    single power law is the right model at all.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (lo >= 1.0 and hi > lo):
        raise DomainError(f"window must satisfy 1 <= lo < hi, got {window}")
    mask = (series.times >= lo) & (series.times <= hi)
    n = int(np.count_nonzero(mask))
    if n < 10:
        raise DomainError(f"only {n} samples inside window {window}; need >= 10")
    t = series.times[mask]
    v = series.values[mask]
    if np.any(v <= 0.0):
        raise DomainError("zero or negative values inside the fit window")
    x = np.log(t)
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return DecayFit(window=(lo, hi), exponent=float(slope),
                    intercept=float(intercept), rms_residual=rms, n_samples=n)


def l2_norm(profile, dx: float) -> float:
    """Composite-trapezoid approximation of the spatial L2 norm.

    ``profile`` samples the function on equispaced nodes including both
    boundary nodes; second-order accurate in dx for smooth profiles.
    """
    u = np.asarray(profile, dtype=float)
    if u.ndim != 1 or u.size < 2:
        raise DomainError("profile must be a 1-D array of at least 2 nodes")
    sq = u * u
    integral = dx * (0.5 * sq[0] + np.sum(sq[1:-1]) + 0.5 * sq[-1])
    return float(np.sqrt(integral))


def log_uniform_indices(times: np.ndarray, lo: float, hi: float, n: int = 50) -> np.ndarray:
    """Indices of samples nearest to n log-uniform targets in [lo, hi],
    deduplicated and sorted. Used to thin dense uniform grids before fitting."""
    targets = np.exp(np.linspace(np.log(lo), np.log(hi), n))
    idx = np.searchsorted(times, targets)
    idx = np.clip(idx, 0, times.size - 1)
    left = np.maximum(idx - 1, 0)
    pick = np.where(np.abs(times[left] - targets) < np.abs(times[idx] - targets), left, idx)
    return np.unique(pick)
