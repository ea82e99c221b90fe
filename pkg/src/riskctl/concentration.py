"""Lower-tail probability bounds and the induced upper confidence bound.

Both bounds control P(empirical risk <= t) for i.i.d. losses in [0, 1] with
true mean R: the tighter (KL-form) Hoeffding bound exp(-n*f(t;R)), and the
Bentkus bound e*P(Bi(n,R) <= ceil(n*t)).  Inverting their pointwise minimum
in R at the observed empirical risk yields a (1-delta) upper confidence
bound on the true risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DomainError

_BISECT_ITERS = 60  # interval shrinks by 2**-60, far below the 1e-7 tolerance
_ONE_MINUS = 1.0 - 1e-10


class TailBound(str, Enum):
    HOEFFDING = "hoeffding"
    BENTKUS = "bentkus"
    HOEFFDING_BENTKUS = "hoeffding_bentkus"


@dataclass(frozen=True)
class BoundParams:
    """Calibration size and error rate for a confidence bound."""

    n: int
    delta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")


def hoeffding_f(t, R):
    """KL-style exponent f(t;R) = t*log(t/R) + (1-t)*log((1-t)/(1-R)).

    Accepts scalars or arrays; 0*log(0/x) is taken as 0 by continuity.
    """
    t = np.asarray(t, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if np.any((R <= 0.0) | (R >= 1.0)):
        raise DomainError("R must lie strictly inside (0, 1)")
    if np.any((t < 0.0) | (t > 1.0)):
        raise DomainError("t must lie in [0, 1]")
    value = xlogy(t, t / R) + xlogy(1.0 - t, (1.0 - t) / (1.0 - R))
    return float(value) if value.ndim == 0 else value


def g_hoeffding(t: float, R: float, n: int) -> float:
    """Hoeffding lower-tail bound exp(-n*f(t;R)); vacuous (1) when t >= R."""
    if t >= R:
        # the inequality only bites below the mean
        hoeffding_f(t, R)  # still validate the domain
        return 1.0
    return float(math.exp(-n * hoeffding_f(t, R)))


def _log_coefficients(k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Log binomial coefficients for the terms j = 0..k of an n-trial CDF."""
    j = np.arange(0, k + 1, dtype=np.float64)
    return j, gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0)


def _log_cdf_from_coefficients(j: np.ndarray, coef: np.ndarray, n: int, R: float) -> float:
    log_terms = coef + j * math.log(R) + (n - j) * math.log1p(-R)
    peak = float(np.max(log_terms))
    total = peak + math.log(float(np.sum(np.exp(log_terms - peak))))
    return min(total, 0.0)


def log_binom_cdf(k: int, n: int, R: float) -> float:
    """log P(Bi(n, R) <= k), summed in log space so large n cannot overflow."""
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    if R <= 0.0:
        return 0.0
    if R >= 1.0:
        return -math.inf
    j, coef = _log_coefficients(k, n)
    return _log_cdf_from_coefficients(j, coef, n, R)


def binom_cdf(k: int, n: int, R: float) -> float:
    return math.exp(log_binom_cdf(k, n, R))


def _ceil_count(n: int, t: float) -> int:
    """ceil(n*t) with float noise around exact integers rounded away.

    Empirical risks are rationals with denominator near n, so a product that
    lands within 5e-10 of an integer is that integer, not the next one up.
    """
    return min(int(math.ceil(round(n * t, 9))), n)


def g_bentkus(t: float, R: float, n: int) -> float:
    """Bentkus lower-tail bound min(1, e * P(Bi(n,R) <= ceil(n*t)))."""
    if t < 0.0 or R < 0.0 or R > 1.0 or n < 1:
        raise DomainError(f"invalid Bentkus arguments t={t}, R={R}, n={n}")
    return min(1.0, math.e * binom_cdf(_ceil_count(n, t), n, R))


def g_hb(t: float, R: float, n: int) -> float:
    """Pointwise minimum of the Hoeffding and Bentkus bounds."""
    return min(g_hoeffding(t, R, n), g_bentkus(t, R, n))


class _LowerTailCurve:
    """g(t; R) as a function of R with t and n frozen.

    The bisection in :func:`ucb` evaluates the same (t, n) dozens of times,
    so the binomial coefficient table is built once here.  Values agree
    exactly with g_hoeffding / g_bentkus / g_hb.
    """

    def __init__(self, t: float, n: int, bound: TailBound):
        self.t = t
        self.n = n
        self.bound = TailBound(bound)
        if self.bound is not TailBound.HOEFFDING:
            self._k = _ceil_count(n, t)
            self._j, self._coef = _log_coefficients(self._k, n)

    def _bentkus(self, R: float) -> float:
        if R <= 0.0:
            log_cdf = 0.0
        elif R >= 1.0:
            log_cdf = 0.0 if self._k >= self.n else -math.inf
        elif self._k >= self.n:
            log_cdf = 0.0
        else:
            log_cdf = _log_cdf_from_coefficients(self._j, self._coef, self.n, R)
        return min(1.0, math.e * math.exp(log_cdf))

    def __call__(self, R: float) -> float:
        if self.bound is TailBound.BENTKUS:
            return self._bentkus(R)
        hoeffding = g_hoeffding(self.t, R, self.n)
        if self.bound is TailBound.HOEFFDING:
            return hoeffding
        return min(hoeffding, self._bentkus(R))


def ucb(r_hat: float, params: BoundParams, bound: TailBound = TailBound.HOEFFDING_BENTKUS) -> float:
    """(1-delta) upper confidence bound on the true risk given empirical risk.

    Returns sup{R in [r_hat, 1] : g(r_hat; R) >= delta}, found by bisection
    to absolute tolerance well below 1e-7; g(t; .) is non-increasing in R for
    fixed t, so the feasible set is an interval anchored at r_hat.
    """
    if not 0.0 <= r_hat <= 1.0:
        raise DomainError(f"empirical risk must lie in [0, 1], got {r_hat}")
    if r_hat >= 1.0:
        return 1.0
    g = _LowerTailCurve(r_hat, params.n, bound)
    delta = params.delta
    if g(_ONE_MINUS) >= delta:
        return 1.0
    lo, hi = r_hat, _ONE_MINUS
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if g(mid) >= delta:
            lo = mid
        else:
            hi = mid
    return lo


def ucb_batch(
    r_hats,
    params: BoundParams,
    bound: TailBound = TailBound.HOEFFDING_BENTKUS,
) -> np.ndarray:
    """Vector of UCBs, caching repeated empirical-risk values."""
    r_hats = np.asarray(r_hats, dtype=np.float64)
    cache: dict[float, float] = {}
    out = np.empty_like(r_hats)
    flat = r_hats.reshape(-1)
    flat_out = out.reshape(-1)
    for i, r in enumerate(flat):
        key = float(r)
        if key not in cache:
            cache[key] = ucb(key, params, bound)
        flat_out[i] = cache[key]
    return out
