"""Shared test oracles, all independent of the library's evaluation paths."""

import math

import mpmath
import numpy as np
import pytest
from scipy.special import gammaln


def ml_series_reference(eta: float, mu: float, z: float) -> float:
    """Extended-precision truncated power series for E_{eta,mu}(z), z <= 0.

    Working precision is chosen from the largest-term estimate so the
    alternating cancellation is fully resolved; the Gamma argument is formed
    in working precision (a float64 argument drifts by k*ulp(eta), which the
    huge terms amplify).
    """
    absz = abs(z)
    kstar = absz ** (1.0 / eta) / eta + 10.0
    if kstar > 250000:
        raise ValueError("series reference impractical at these parameters")
    dps = int(max(40.0, (kstar * math.log(max(absz, 1.0))
                         - float(gammaln(eta * kstar + mu))) / math.log(10.0) + 40.0))
    with mpmath.workdps(dps):
        e_mp, m_mp, zz = mpmath.mpf(eta), mpmath.mpf(mu), mpmath.mpf(z)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        stop = mpmath.mpf(10) ** (-dps + 6)
        tiny = 0
        k = 0
        while True:
            term = power / mpmath.gamma(e_mp * k + m_mp)
            total += term
            if abs(term) <= stop * abs(total) + mpmath.mpf(10) ** (-dps - 10):
                tiny += 1
                if tiny >= 3:
                    break
            else:
                tiny = 0
            k += 1
            power *= zz
            if k > 300000:
                raise ValueError("reference series did not converge")
        return float(total)


def ml_integral_reference(eta: float, x: float, second: bool = False) -> float:
    """Completely monotone integral representations, for 0 < eta < 1, x > 0:

    E_{eta,1}(-x)   = (x sin(eta pi)/pi) *
                      int_0^inf e^{-r} r^{eta-1} / d(r) dr,
    E_{eta,eta}(-x) = (sin(eta pi)/pi) *
                      int_0^inf e^{-r} r^{eta}   / d(r) dr,

    with d(r) = r^{2 eta} + 2 x r^eta cos(eta pi) + x^2.  Entirely
    independent of any series evaluation.
    """
    if not (0.0 < eta < 1.0 and x > 0.0):
        raise ValueError("integral representation needs 0 < eta < 1, x > 0")
    with mpmath.workdps(40):
        ee = mpmath.mpf(eta)
        xx = mpmath.mpf(x)
        s = mpmath.sin(ee * mpmath.pi)

        def f(r):
            d = r ** (2 * ee) + 2 * xx * r ** ee * mpmath.cos(ee * mpmath.pi) + xx ** 2
            p = r ** ee if second else r ** (ee - 1)
            return mpmath.e ** (-r) * p / d

        val = mpmath.quad(f, [0, 1, mpmath.inf])
        pref = s / mpmath.pi if second else xx * s / mpmath.pi
        return float(pref * val)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
