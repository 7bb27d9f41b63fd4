"""Exact eigenmode solution of the decoupled mixed-order system on (0, pi):

    u_t + A u = 0,     d^beta v + A v = u,    v(0) = 0,

with A = -d^2/dx^2 under Dirichlet walls, so the eigenpairs are
lambda_n = n^2, phi_n = sqrt(2/pi) sin(n x).  Mode n evolves as

    u_n(t) = e^{-n^2 t} (u0, phi_n),
    v_n(t) = (u0, phi_n) * int_0^t tau^{beta-1} E_{beta,beta}(-n^2 tau^beta)
                                   e^{-n^2 (t-tau)} dtau,

and for large t the slow component approaches the separated form

    v(t) ~ (A^{-3} u0) t^{-(1+beta)} / (-Gamma(-beta)),

with the next correction (A^{-4} u0) t^{-(2+beta)} / Gamma(-1-beta).  This
module is the independent oracle for that superlinear regime, plus the
series identities used to cross-check the convolution algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, QuadratureError
from .mittag_leffler import gamma_fn, ml_neg


def eigenvalues(n_modes: int) -> np.ndarray:
    """lambda_n = n^2 for the Dirichlet Laplacian on (0, pi)."""
    return np.arange(1, n_modes + 1, dtype=float) ** 2


def eigenfunction(n: int, x: np.ndarray) -> np.ndarray:
    """phi_n(x) = sqrt(2/pi) sin(n x), orthonormal in L2(0, pi)."""
    return math.sqrt(2.0 / math.pi) * np.sin(n * np.asarray(x, dtype=float))


def project_initial(u0, n_modes: int, n_quad: int = 16384) -> np.ndarray:
    """Coefficients (u0, phi_n) by composite trapezoid on a fine grid."""
    x = np.linspace(0.0, math.pi, n_quad + 1)
    vals = np.asarray(u0(x), dtype=float) if callable(u0) else np.asarray(u0, float)
    dx = x[1] - x[0]
    coeffs = np.empty(n_modes)
    for n in range(1, n_modes + 1):
        integrand = vals * eigenfunction(n, x)
        coeffs[n - 1] = dx * (0.5 * integrand[0] + integrand[1:-1].sum()
                              + 0.5 * integrand[-1])
    # trapezoid noise on exactly-orthogonal modes is pure rounding; zero it
    coeffs[np.abs(coeffs) < 1e-14 * np.max(np.abs(coeffs), initial=0.0)] = 0.0
    return coeffs


@dataclass(frozen=True)
class ModeConvolution:
    """One mode's kernel convolution int_0^t tau^{beta-1}
    E_{beta,beta}(-lam tau^beta) e^{-lam (t-tau)} dtau; positive for t > 0."""

    lam: float
    beta: float
    t: float
    value: float

    @classmethod
    def evaluate(cls, lam: float, beta: float, t: float,
                 rtol: float = 1e-10) -> "ModeConvolution":
        return cls(lam=lam, beta=beta, t=t,
                   value=mode_convolution(lam, beta, t, rtol=rtol))


def mode_convolution(lam: float, beta: float, t: float, rtol: float = 1e-10) -> float:
    """The mode kernel convolution, by adaptive quadrature.

    Split at tau = t/2: the left part removes the tau^{beta-1} singularity by
    the substitution sigma = tau^beta; the right part integrates against the
    e^{-lam u} spike in u = t - tau.  Exponentially negligible pieces are
    bounded and skipped.  Relative accuracy ~1e-9 per mode.
    """
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    if lam < 0.0:
        raise DomainError(f"eigenvalue must be >= 0, got {lam}")
    if lam == 0.0:
        return t ** beta / math.gamma(beta + 1.0)

    def left_sigma(cut: float) -> float:
        # int_0^cut tau^{beta-1} E(-lam tau^beta) e^{-lam (t - tau)} dtau
        def f(sig):
            tau = sig ** (1.0 / beta)
            return (float(ml_neg(beta, beta, -lam * sig)) / beta
                    * math.exp(-lam * (t - tau)))

        val, err = quad(f, 0.0, cut ** beta, epsabs=1e-300, epsrel=1e-11, limit=300)
        return val, err

    def right_u(lo: float, hi: float) -> float:
        # int over u = t - tau in [lo, hi]
        def g(u):
            tau = t - u
            return (tau ** (beta - 1.0)
                    * float(ml_neg(beta, beta, -lam * tau ** beta))
                    * math.exp(-lam * u))

        val, err = quad(g, lo, hi, epsabs=1e-300, epsrel=1e-11, limit=300)
        return val, err

    parts = []
    errs = []
    if lam * t <= 80.0:
        v1, e1 = left_sigma(0.5 * t)
        v2, e2 = right_u(0.0, 0.5 * t)
        parts += [v1, v2]
        errs += [e1, e2]
    else:
        # only the spike u <= 65/lam matters; the rest is bounded by
        # e^{-lam T1} * (total kernel mass 1/lam)
        T1 = 65.0 / lam
        v2, e2 = right_u(0.0, T1)
        parts.append(v2)
        errs.append(e2 + math.exp(-65.0) / lam)
    total = float(sum(parts))
    err = float(sum(errs))
    if not err <= max(rtol * abs(total), 1e-280):
        raise QuadratureError(
            f"mode convolution at lam={lam:g}, t={t:g}: error {err:.2e} "
            f"vs value {total:.6e}")
    return total


def decoupled_solve(u0_coeffs, beta: float, t: float, n_modes: int | None = None):
    """Mode coefficients (u_n(t), v_n(t)) of the exact solution."""
    coeffs = np.asarray(u0_coeffs, dtype=float)
    if n_modes is None:
        n_modes = coeffs.size
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    return _decoupled(coeffs, beta, t, eigenvalues(n_modes))


def _decoupled(coeffs, beta, t, lam):
    with np.errstate(under="ignore"):
        u_coeffs = np.exp(-lam * t) * coeffs[: lam.size]
    v_coeffs = np.array([
        coeffs[i] * mode_convolution(float(lam[i]), beta, t) if coeffs[i] != 0.0
        else 0.0
        for i in range(lam.size)])
    return u_coeffs, v_coeffs


def q_integral(t: float, j: int, k: int, beta: float) -> float:
    """Closed form t^{beta(j+1)+k-j} / Gamma(beta j + k - j + beta + 1) of the
    Beta-function integral int_0^t tau^{beta(j+1)-1} (t-tau)^{k-j}
    / (Gamma(beta j + beta) Gamma(k-j+1)) dtau."""
    if not (t > 0.0 and 0 <= j <= k and 0.0 < beta < 1.0):
        raise DomainError("need t > 0, 0 <= j <= k, beta in (0, 1)")
    return t ** (beta * (j + 1) + k - j) / math.gamma(beta * j + k - j + beta + 1.0)


def r_series_identity(lam: float, beta: float, t: float, k_max: int = 25):
    """Both sides of the double-series rearrangement:

    lhs = sum_{k<=k_max} (-lam)^k sum_{j<=k} t^{beta j + (k-j)br}
          / Gamma(beta j + (k-j) + beta + 1),
    rhs = sum_{k<=k_max} (-lam t^beta)^k E_{1, beta(k+1)+1}(-lam t).

    Valid comparison regime lam * t <= 5 where both converge fast in float.
    """
    if k_max < 20:
        raise DomainError(f"k_max must be >= 20, got {k_max}")
    if not (t > 0.0 and lam >= 0.0):
        raise DomainError("need t > 0 and lam >= 0")
    if lam * t > 5.0:
        raise DomainError("identity check restricted to lam * t <= 5")
    log_t = math.log(t)
    log_lam = math.log(lam) if lam > 0.0 else -math.inf
    lhs = 0.0
    for k in range(k_max + 1):
        inner = 0.0
        for j in range(k + 1):
            # exp/lgamma form: plain Gamma overflows beyond argument ~171
            inner += math.exp((beta * j + (k - j)) * log_t
                              - math.lgamma(beta * j + (k - j) + beta + 1.0))
        sign = -1.0 if k % 2 else 1.0
        lhs += sign * math.exp(k * log_lam) * inner if lam > 0.0 else (inner if k == 0 else 0.0)
    rhs = 0.0
    for k in range(k_max + 1):
        mu = beta * (k + 1) + 1.0
        sign = -1.0 if k % 2 else 1.0
        coeff = sign * math.exp(k * (log_lam + beta * log_t)) if lam > 0.0 else (1.0 if k == 0 else 0.0)
        if coeff == 0.0:
            continue
        rhs += coeff * float(ml_neg(1.0, mu, -lam * t))
    return lhs, rhs


def asymptotic_v(u0_coeffs, beta: float, t: float) -> np.ndarray:
    """Two-term large-time expansion of the v mode coefficients:

    v_n ~ (u0,phi_n)/lam^3 * t^{-(1+beta)}/(-Gamma(-beta))
        + (u0,phi_n)/lam^4 * t^{-(2+beta)}/Gamma(-1-beta).

    The t^{-(1+beta)} coefficients (u0,phi_n)/lam_n^3 are the modes of the
    limit pattern (the triple inverse of the elliptic operator applied to
    the fast component's initial data).
    """
    if t < 10.0:
        raise DomainError(f"asymptotic form is for t >= 10, got {t}")
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    coeffs = np.asarray(u0_coeffs, dtype=float)
    lam = eigenvalues(coeffs.size)
    lead = coeffs / lam ** 3 * t ** (-(1.0 + beta)) / (-gamma_fn(-beta))
    nxt = coeffs / lam ** 4 * t ** (-(2.0 + beta)) / gamma_fn(-1.0 - beta)
    return lead + nxt


@dataclass
class SpectralSolution:
    """Eigenmode solution wrapper: initial coefficients, norms, tail bound."""

    beta: float
    n_modes: int = 64
    u0_coeffs: np.ndarray | None = None
    u0: object = None

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if self.u0_coeffs is None:
            if self.u0 is None:
                raise DomainError("need u0 or u0_coeffs")
            self.u0_coeffs = project_initial(self.u0, self.n_modes)
        else:
            self.u0_coeffs = np.asarray(self.u0_coeffs, dtype=float)
            self.n_modes = self.u0_coeffs.size

    def eigenvalues(self) -> np.ndarray:
        return eigenvalues(self.n_modes)

    def u_coeffs(self, t: float) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(-self.eigenvalues() * t) * self.u0_coeffs

    def v_coeffs(self, t: float) -> np.ndarray:
        _, v = _decoupled(self.u0_coeffs, self.beta, t, self.eigenvalues())
        return v

    def v_coeffs_asymptotic(self, t: float) -> np.ndarray:
        return asymptotic_v(self.u0_coeffs, self.beta, t)

    def u_norm(self, t: float) -> float:
        return float(np.linalg.norm(self.u_coeffs(t)))

    def v_norm(self, t: float) -> float:
        return float(np.linalg.norm(self.v_coeffs(t)))

    def v_norm_asymptotic(self, t: float) -> float:
        return float(np.linalg.norm(self.v_coeffs_asymptotic(t)))

    def tail_estimate(self, t: float) -> float:
        """Crude bound on the truncated modes: the u part is below
        e^{-lam_{n+1} t} |u0|, the v part below the lam^{-3} tail of the
        limit-pattern coefficients."""
        lam_next = float((self.n_modes + 1) ** 2)
        u0_scale = float(np.max(np.abs(self.u0_coeffs), initial=0.0))
        with np.errstate(under="ignore"):
            u_tail = math.exp(-min(lam_next * t, 700.0)) * u0_scale
        v_tail = u0_scale * lam_next ** -3 * t ** (-(1.0 + self.beta)) \
            / (-gamma_fn(-self.beta))
        return u_tail + v_tail
