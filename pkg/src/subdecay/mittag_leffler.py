"""Two-parameter Mittag-Leffler function E_{eta,mu}(z) on the negative real
axis, plus the Gamma function at arbitrary non-pole arguments.

E_{eta,mu}(z) = sum_k z^k / Gamma(eta*k + mu).  Everything downstream
(relaxation kernels, Picard iterations, spectral solutions) reduces to this
function evaluated at z <= 0, so the evaluator aims at ~1e-12 relative
accuracy and refuses to return silently degraded values.

Evaluation strategy per point, chosen by a-posteriori error estimates:

* power series with compensated (Kahan) summation, viable while the largest
  term does not destroy float64 significance;
* the algebraic large-|z| expansion  -sum_{k>=1} z^{-k}/Gamma(mu - eta*k),
  truncated at its smallest term (1/Gamma at a pole contributes exactly 0);
* an extended-precision series (mpmath) for the crossover band where neither
  float64 route reaches the target.

For eta = 1 the expansion misses the exponentially small e^z part, so the
error estimate accounts for it and E_{1,1} short-circuits to exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import DomainError, NumericalError, UnsupportedRangeError

_EPS = float(np.finfo(float).eps)
_SERIES_CAP = 2000
_ASYMP_CAP = 400
# validated accuracy envelope of the public evaluator
_ETA_RANGE = (0.1, 1.0)
_MU_RANGE = (0.1, 3.0)
_Z_MIN = -1.0e4


def _sinpi(x: float) -> float:
    """sin(pi*x) with exact argument reduction (no pi*x rounding blowup)."""
    r = x - round(x)
    s = math.sin(math.pi * r)
    return s if round(x) % 2 == 0 else -s


def gamma_fn(x: float) -> float:
    """Gamma(x) for real x that is not a non-positive integer.

    Positive arguments go straight to the platform gamma; negative ones use
    the reflection formula Gamma(x)Gamma(1-x) = pi/sin(pi*x).  Relative error
    is a few ulp for |x| <= 20.
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise DomainError(f"gamma_fn pole at x={x:g} (non-positive integer)")
    if x > 0.0:
        return math.gamma(x)
    return math.pi / (_sinpi(x) * math.gamma(1.0 - x))


@dataclass(frozen=True)
class MLQuery:
    """Parameters (eta, mu) and argument z for one Mittag-Leffler evaluation.

    eta must be positive; the evaluation domain is restricted to z <= 0
    (every use downstream is of the form -lambda*t^eta or -c*t^eta).
    """

    eta: float
    mu: float
    z: float

    def __post_init__(self):
        if not self.eta > 0.0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if self.z > 0.0:
            raise DomainError(f"z must be <= 0, got {self.z}")

    def evaluate(self) -> float:
        return ml_eval(self.eta, self.mu, self.z)


@lru_cache(maxsize=256)
def _series_ratios(eta: float, mu: float, cap: int) -> np.ndarray:
    """Term ratios Gamma(eta*k+mu)/Gamma(eta*(k+1)+mu) for k = 0..cap-1."""
    k = np.arange(cap, dtype=float)
    return np.exp(gammaln(eta * k + mu) - gammaln(eta * k + eta + mu))


@lru_cache(maxsize=256)
def _asymp_weights(eta: float, mu: float, cap: int) -> np.ndarray:
    """1/Gamma(mu - eta*k) for k = 1..cap; exactly 0 at the Gamma poles.

    Arguments within a few ulps of a non-positive integer are snapped onto
    the pole: rounding of mu - eta*k otherwise yields ghost weights ~1e-15
    whose terms wreck the optimal-truncation error estimate.
    """
    k = np.arange(1, cap + 1, dtype=float)
    a = mu - eta * k
    w = rgamma(a)
    nearest = np.round(a)
    snap = (nearest <= 0.0) & (np.abs(a - nearest) <= 64.0 * _EPS * np.maximum(1.0, eta * k))
    w[snap] = 0.0
    return w


def _series_f64(eta, mu, z):
    """Vectorized power series. Returns (value, relative error estimate).

    The estimate combines rounding loss (condition number of the alternating
    sum times eps) with the last-term size when the 2000-term cap is hit.
    Requires mu > 0 so no series denominator hits a Gamma pole.
    """
    ratios = _series_ratios(float(eta), float(mu), _SERIES_CAP)
    term = np.full(z.shape, rgamma(mu))
    total = term.copy()
    comp = np.zeros_like(z)
    abssum = np.abs(term)
    tiny_runs = np.zeros(z.shape, dtype=np.int8)
    k_used = 0
    for k in range(_SERIES_CAP):
        k_used = k + 1
        term = term * z * ratios[k]
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        at = np.abs(term)
        abssum += at
        tiny = at <= 0.25 * _EPS * np.abs(total)
        tiny_runs = np.where(tiny, tiny_runs + 1, 0)
        if np.all(tiny_runs >= 2):
            converged = np.ones(z.shape, dtype=bool)
            break
        if not np.all(np.isfinite(term)) or np.max(at) > 1e260:
            converged = np.zeros(z.shape, dtype=bool)
            break
    else:
        converged = tiny_runs >= 2
    scale = np.maximum(np.abs(total), 1e-300)
    # rounding of the Gamma argument eta*k+mu perturbs term k by about
    # eps * eta*k * psi(eta*k+mu), which dominates plain summation rounding
    # once many terms are in play; inflate the estimate accordingly
    arg = eta * k_used + mu
    est = abssum / scale * _EPS * (1.0 + arg * math.log(2.0 + arg))
    est = np.where(converged, est, np.inf)
    return total, est


def _asymp_f64(eta, mu, z):
    """Vectorized large-|z| expansion with per-point optimal truncation.

    Sums -z^{-k}/Gamma(mu-eta*k) while the (nonzero) term magnitudes shrink,
    freezing each point once they clearly grow again; the smallest term seen
    is the error estimate.  If the nonzero weights run out before any growth
    (possible only for eta == 1, where the expansion terminates), truncation
    is exact up to the exponentially small e^z part, which is added to the
    estimate for eta == 1 in all cases.
    """
    weights = _asymp_weights(float(eta), float(mu), _ASYMP_CAP)
    finite = np.isfinite(weights)
    n_usable = int(np.argmax(~finite)) if not finite.all() else _ASYMP_CAP
    nz_idx = np.flatnonzero(weights[:n_usable] != 0.0)
    last_nz = int(nz_idx[-1]) if nz_idx.size else -1

    zinv = np.zeros_like(z)
    nonzero_z = z != 0.0
    zinv[nonzero_z] = 1.0 / z[nonzero_z]
    power = np.ones_like(z)
    total = np.zeros_like(z)
    best = np.full(z.shape, np.inf)
    frozen = ~nonzero_z
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        for k in range(last_nz + 1):
            power = power * zinv
            if weights[k] == 0.0:
                continue
            a = -power * weights[k]
            mag = np.abs(a)
            frozen |= mag > 2.0 * best
            total = np.where(frozen, total, total + a)
            best = np.where((mag < best) & ~frozen, mag, best)
            if np.all(frozen):
                break
    if eta == 1.0 and not np.all(frozen):
        # ran out of nonzero weights without growth: expansion terminated
        best[~frozen & nonzero_z] = 0.0
    scale = np.maximum(np.abs(total), 1e-300)
    est = np.where(np.isfinite(best), best, np.inf) / scale * 3.0
    if eta == 1.0:
        est = est + np.exp(np.maximum(z, -700.0)) / scale
    est[~nonzero_z] = np.inf
    return total, est


def _mp_series(eta: float, mu: float, z: float, rtol: float) -> float:
    """Extended-precision series for one point in the crossover band."""
    import mpmath

    absz = abs(z)
    if absz <= 1.0:
        kstar = 10.0
    else:
        kstar = absz ** (1.0 / eta) / eta + 10.0
    if kstar > 2e5:
        raise NumericalError(
            f"mittag-leffler series needs ~{kstar:.3g} terms at "
            f"eta={eta:g}, z={z:g}; no convergent evaluation path"
        )
    log10_max = (kstar * math.log(max(absz, 1.0))
                 - float(gammaln(eta * kstar + mu))) / math.log(10.0)
    dps = int(max(30.0, log10_max + 15.0 - math.log10(rtol)))
    if dps > 3000:
        raise NumericalError(
            f"extended-precision series would need ~{dps} digits at "
            f"eta={eta:g}, mu={mu:g}, z={z:g}")
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        # Gamma argument must be formed in working precision: forming
        # eta*k+mu in float64 drifts by k*ulp(eta), which the huge
        # cancelling terms amplify into O(1) errors of the sum
        eta_mp = mpmath.mpf(eta)
        mu_mp = mpmath.mpf(mu)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        term_stop = mpmath.mpf(10) ** (-dps)
        k = 0
        tiny = 0
        while k < 500000:
            term = power / mpmath.gamma(eta_mp * k + mu_mp)
            total += term
            if abs(term) <= term_stop * (abs(total) + term_stop):
                tiny += 1
                if tiny >= 3:
                    break
            else:
                tiny = 0
            k += 1
            power *= zz
        else:
            raise NumericalError("extended-precision series did not converge")
        return float(total)


def ml_neg(eta: float, mu: float, z, rtol: float = 1e-12):
    """E_{eta,mu}(z) for arrays of z <= 0, without the public envelope check.

    Internal workhorse: callers that need parameters outside the validated
    public envelope (e.g. large mu in series identities, or z below -1e4
    where the expansion only gets better) come through here.  ``rtol`` is the
    accepted relative error before falling back to extended precision;
    kernel builders relax it to avoid pointless mpmath work.
    """
    eta = float(eta)
    mu = float(mu)
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"ml_neg supports 0 < eta <= 1, got {eta}")
    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    if np.any(z_arr > 0.0):
        raise DomainError("ml_neg requires z <= 0")
    out = np.empty_like(z_arr)

    if eta == 1.0 and mu == 1.0:
        out[:] = np.exp(z_arr)
        return float(out[0]) if scalar else out

    zero = z_arr == 0.0
    out[zero] = rgamma(mu)
    todo = ~zero
    if np.any(todo):
        zv = z_arr[todo]
        vals = np.empty_like(zv)
        done = np.zeros(zv.shape, dtype=bool)

        def attempt(method, mask):
            idx = np.flatnonzero(mask & ~done)
            if idx.size == 0:
                return
            v, e = method(eta, mu, zv[idx])
            ok = e <= rtol
            vals[idx[ok]] = v[ok]
            done[idx[ok]] = True

        big = np.abs(zv) >= 4.0
        attempt(_asymp_f64, big)
        attempt(_series_f64, ~big)
        # crossover band: try the other float64 route before extended precision
        attempt(_series_f64, big & (np.abs(zv) <= 40.0))
        attempt(_asymp_f64, ~big)
        for i in np.flatnonzero(~done):
            vals[i] = _mp_series(eta, mu, float(zv[i]), rtol)
        out[todo] = vals
    return float(out[0]) if scalar else out


class _SplineTable:
    """Cubic spline of E_{eta,mu}(-e^u) in u = log(-z) over a fixed range."""

    def __init__(self, eta: float, mu: float, zmin: float, zmax: float, rtol: float):
        from scipy.interpolate import CubicSpline

        self.eta = eta
        self.mu = mu
        self.rtol = rtol
        decades = math.log10(zmax / zmin)
        n = int(min(6000, max(1200, 500 * decades)))
        u = np.linspace(math.log(zmin), math.log(zmax), n)
        self.lo = zmin
        self.hi = zmax
        self.spline = CubicSpline(u, ml_neg(eta, mu, -np.exp(u), rtol=rtol))
        probe = np.exp(np.linspace(math.log(zmin) + 0.37, math.log(zmax) - 0.11, 9))
        direct = ml_neg(eta, mu, -probe, rtol=rtol)
        err = np.abs(self.spline(np.log(probe)) - direct)
        if np.max(err / np.maximum(np.abs(direct), 1e-30)) > 1e-8:
            raise NumericalError("mittag-leffler table failed its interpolation check")

    def covers(self, absz: np.ndarray) -> np.ndarray:
        return (absz >= self.lo) & (absz <= self.hi)

    def __call__(self, absz: np.ndarray) -> np.ndarray:
        return self.spline(np.log(absz))


_TABLE_CACHE: dict = {}


def ml_neg_cached(eta: float, mu: float, z, rtol: float = 1e-10):
    """Array evaluation backed by a cached log-grid spline.

    Large kernel builds evaluate E at tens of thousands of points whose
    arguments sweep through the extended-precision crossover band; a one-time
    table keeps that cost independent of the grid size.  Accuracy is
    ~1e-9 relative (checked against direct evaluation when built), which is
    ample for quadrature weights; use ml_neg directly when full precision
    matters.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if z_arr.size <= 64:
        return ml_neg(eta, mu, z_arr, rtol=rtol)
    absz = np.abs(z_arr)
    pos = absz[absz > 0.0]
    if pos.size == 0:
        return ml_neg(eta, mu, z_arr, rtol=rtol)
    zmax = float(np.max(pos))
    key = (float(eta), float(mu), round(math.log10(zmax), 1))
    table = _TABLE_CACHE.get(key)
    if table is None or zmax > table.hi:
        table = _SplineTable(eta, mu, zmax * 1e-12, zmax * 1.0000001, rtol)
        if len(_TABLE_CACHE) > 64:
            _TABLE_CACHE.clear()
        _TABLE_CACHE[key] = table
    out = np.empty_like(z_arr)
    inside = table.covers(absz)
    out[inside] = table(absz[inside])
    if np.any(~inside):
        out[~inside] = ml_neg(eta, mu, z_arr[~inside], rtol=rtol)
    return out


def ml_eval(eta: float, mu: float, z: float) -> float:
    """E_{eta,mu}(z) within the validated envelope.

    Guaranteed relative error <= 1e-10 for eta in [0.1, 1], mu in [0.1, 3]
    and z in [-1e4, 0]; anything outside raises UnsupportedRangeError rather
    than returning a silently degraded value.
    """
    eta = float(eta)
    mu = float(mu)
    z = float(z)
    if not eta > 0.0:
        raise DomainError(f"eta must be positive, got {eta}")
    if z > 0.0:
        raise DomainError(f"z must be <= 0, got {z}")
    if not (_ETA_RANGE[0] <= eta <= _ETA_RANGE[1]):
        raise UnsupportedRangeError(
            f"eta={eta:g} outside validated range {_ETA_RANGE}")
    if not (_MU_RANGE[0] <= mu <= _MU_RANGE[1]):
        raise UnsupportedRangeError(
            f"mu={mu:g} outside validated range {_MU_RANGE}")
    if z < _Z_MIN:
        raise UnsupportedRangeError(f"z={z:g} below validated minimum {_Z_MIN:g}")
    return float(ml_neg(eta, mu, z, rtol=1e-12))


def ml_eval_query(q: MLQuery) -> float:
    """``ml_eval`` on a packed query."""
    return ml_eval(q.eta, q.mu, q.z)


def relaxation_kernel(eta: float, c: float, t):
    """t^{eta-1} * E_{eta,eta}(-c t^eta), the relaxation kernel of a damped
    fractional mode.

    Strictly positive for t > 0, with the integrable t^{eta-1} singularity
    at the origin.  For eta = 1 this is exactly exp(-c t).
    """
    eta = float(eta)
    c = float(c)
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"relaxation_kernel needs 0 < eta <= 1, got {eta}")
    if c < 0.0:
        raise DomainError(f"damping must be >= 0, got {c}")
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr <= 0.0):
        raise DomainError("relaxation_kernel requires t > 0")
    if eta == 1.0:
        out = np.exp(-c * t_arr)
    else:
        out = t_arr ** (eta - 1.0) * ml_neg(eta, eta, -c * t_arr ** eta, rtol=1e-12)
    return float(out[0]) if scalar else out
