"""Variance distinguisher and its sizing formulas.

The attack decides whether a residual stream a.s* - b mod q looks uniform on
(-q/2, q/2] or like a (wrapped) centered Gaussian. Everything needed for that
decision lives here: moments of the centered uniform, moments of the wrapped
Gaussian (deterministic closed-form integration per wrap, not Monte Carlo),
the lower confidence bound iota on the variance under the uniform null, and
the minimum sample count M(alpha, beta) making the test meet both error rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import norm

from .modmath import center, check_modulus

# wraps are truncated where the remaining Gaussian mass is far below 1e-12
_TAIL_SIGMAS = 9.0


@dataclass(frozen=True)
class TestConfig:
    alpha: float
    beta: float
    M: int | None = None

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")


def uniform_moments(q: int) -> tuple[float, float]:
    """(variance of x, variance of x^2) for x uniform centered mod q.

    Continuous convention: var(x) = q^2/12 and var(x^2) = var(x) (q^2-4)/15.
    """
    q = check_modulus(q)
    s2 = q * q / 12.0
    return s2, s2 * (q * q - 4.0) / 15.0


def _wrapped_moments(v: float, q: int) -> tuple[float, float]:
    """(E[y^2], E[y^4]) for y = centered mod-q reduction of N(0, v).

    Per wrap window [(k-1/2)q, (k+1/2)q] the truncated-normal moments have
    closed forms; summing them over all wraps carrying mass gives the wrapped
    moments to machine precision.
    """
    if v <= 0:
        return 0.0, 0.0
    sigma = math.sqrt(v)
    if sigma >= 3.0 * q:
        # total variation from continuous uniform is ~ 2 exp(-2 pi^2 sigma^2/q^2),
        # below 1e-77 here; the closed-form sum would lose everything to
        # cancellation across thousands of wraps
        return q * q / 12.0, q**4 / 80.0
    nwraps = int(math.ceil(_TAIL_SIGMAS * sigma / q)) + 1
    k = np.arange(-nwraps, nwraps + 1, dtype=np.float64)
    a = (k - 0.5) * q
    b = (k + 0.5) * q
    pa = norm.pdf(a, scale=sigma)
    pb = norm.pdf(b, scale=sigma)
    i0 = norm.cdf(b, scale=sigma) - norm.cdf(a, scale=sigma)
    i1 = v * (pa - pb)
    i2 = v * (i0 + a * pa - b * pb)
    i3 = v * (2.0 * i1 + a**2 * pa - b**2 * pb)
    i4 = v * (3.0 * i2 + a**3 * pa - b**3 * pb)
    c = k * q
    m2 = np.sum(i2 - 2.0 * c * i1 + c**2 * i0)
    m4 = np.sum(i4 - 4.0 * c * i3 + 6.0 * c**2 * i2 - 4.0 * c**3 * i1 + c**4 * i0)
    return float(m2), float(m4)


def f_q(v: float, q: int) -> float:
    """Variance mod q of a centered Gaussian with variance v."""
    q = check_modulus(q)
    if v < 0:
        raise ValueError("variance must be nonnegative")
    m2, _ = _wrapped_moments(float(v), q)
    return m2


def gaussian_mod_moments(v: float, q: int) -> tuple[float, float]:
    """(var(x), var(x^2)) for x a centered Gaussian of variance v reduced mod q.

    The wrapped distribution is symmetric, so var(x) = E[x^2] and
    var(x^2) = E[x^4] - E[x^2]^2.
    """
    q = check_modulus(q)
    if v < 0:
        raise ValueError("variance must be nonnegative")
    m2, m4 = _wrapped_moments(float(v), q)
    return m2, m4 - m2 * m2


def iota(alpha: float, M: int, q: int) -> float:
    """Lower confidence bound on the variance statistic under uniformity."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if M < 1:
        raise ValueError("M must be positive")
    s2u, s2u2 = uniform_moments(q)
    return s2u + float(ndtri(alpha)) * math.sqrt(s2u2 / M)


def min_samples(alpha: float, beta: float, v_signal: float, q: int) -> int:
    """Minimum sample count for the variance test to reach (alpha, beta).

    v_signal is the pre-wrap Gaussian variance of the residual when the cruel
    guess is correct, typically h_r * sigma_r^2 + sigma_e^2.
    """
    s2u, s2u2 = uniform_moments(q)
    s2g, s2g2 = gaussian_mod_moments(v_signal, q)
    if s2g >= s2u:
        raise ValueError(
            "indistinguishable configuration: wrapped variance "
            f"{s2g:.4g} is not below the uniform variance {s2u:.4g}"
        )
    num = float(ndtri(alpha)) * math.sqrt(s2u2) + float(ndtri(beta)) * math.sqrt(s2g2)
    return int(math.ceil((num / (s2g - s2u)) ** 2))


def variance_statistic(residuals, q: int) -> float:
    """Known-zero-mean variance estimator: mean of squared centered residuals."""
    q = check_modulus(q)
    r = np.asarray(residuals)
    if r.size == 0:
        raise ValueError("empty residual stream")
    c = center(r, q).astype(np.float64)
    return float(np.mean(c * c))


def distinguish(residuals, alpha: float, q: int) -> bool:
    """True iff the residual stream is rejected as uniform (candidate accepted)."""
    r = np.asarray(residuals)
    return variance_statistic(r, q) < iota(alpha, r.size, q)


def sigma_r_ratio(rho: float, n: int, n_u: int) -> float:
    """Cool-column stdev predicted from the reduction factor, as a fraction
    of the uniform stdev: sqrt((rho^2 n - n_u) / (n - n_u))."""
    n_r = n - n_u
    if n_r <= 0:
        raise ValueError("no cool columns (n_u >= n)")
    val = (rho * rho * n - n_u) / n_r
    if val < 0:
        raise ValueError(f"inconsistent inputs: rho^2 n = {rho*rho*n:.2f} < n_u = {n_u}")
    return math.sqrt(val)


def estimate_min_samples(
    n: int,
    q: int,
    n_u: int,
    h: int,
    sigma_e_ratio: float,
    alpha: float,
    beta: float,
    *,
    rho: float | None = None,
    sigma_r_over_u: float | None = None,
    worst_case: bool = True,
) -> int:
    """Sample count M for a full attack configuration.

    sigma_r may be given directly (as a fraction of sigma_u) or derived from
    rho. Worst case puts all h secret ones in the cool region (h_r = h);
    average case uses h_r = (n_r/n) h, left non-integer on purpose.
    """
    if sigma_r_over_u is None:
        if rho is None:
            raise ValueError("need rho or sigma_r_over_u")
        sigma_r_over_u = sigma_r_ratio(rho, n, n_u)
    s2u = q * q / 12.0
    h_r = float(h) if worst_case else (n - n_u) / n * h
    v_signal = (h_r * sigma_r_over_u**2 + sigma_e_ratio**2) * s2u
    return min_samples(alpha, beta, v_signal, q)
