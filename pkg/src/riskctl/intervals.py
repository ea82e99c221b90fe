"""Truncated-Gaussian score distributions and interval calibration.

Each instance's masked-score distribution yields an empirical mean and
population standard deviation.  Refitting a Gaussian truncated to the score
support [0, 2.5], with the original mean and a rescaled standard deviation,
produces a calibrated location (mean_hat) and uncertainty (std_hat).  The
rescaling factor is selected so that uncertainties correlate with the actual
deviation from human scores, measured by the Uncertainty Pearson Score::

    UPS(lambda)  = pearson(|mean_hat(lambda) - y|, std_hat(lambda))
    risk(lambda) = 1 - max(0, UPS(lambda))

The risk is not monotone in the scaling factor, so the threshold search of
the detection path does not apply; selection runs through the multiple-
testing path instead (see riskcal.ltt_select).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

from .errors import MissingLabelError, NumericalError, ZeroVariance
from .metrics import kendall_tau_c, pearson
from .scoredata import SCORE_MAX, SCORE_MIN, Dataset, ScoredInstance, summarize_distribution

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_MIN_MASS = 1e-300


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _Phi(z):
    return 0.5 * erfc(-np.asarray(z, dtype=np.float64) / _SQRT2)


@dataclass(frozen=True)
class TruncGaussian:
    """A Gaussian restricted to the score support, with derived moments."""

    loc: float
    scale: float
    lo: float
    hi: float
    mean_hat: float
    std_hat: float


def _interval_mass(a, b):
    """Phi(b) - Phi(a), evaluated in whichever tail keeps precision."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    central = 0.5 * (erf(b / _SQRT2) - erf(a / _SQRT2))
    upper_tail = 0.5 * (erfc(a / _SQRT2) - erfc(b / _SQRT2))
    lower_tail = 0.5 * (erfc(-b / _SQRT2) - erfc(-a / _SQRT2))
    out = np.where(a > 0.0, upper_tail, np.where(b < 0.0, lower_tail, central))
    return out


def _trunc_moments(loc, scale, lo=SCORE_MIN, hi=SCORE_MAX):
    """Vectorized truncated-normal mean and std for positive scales."""
    loc = np.asarray(loc, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    a = (lo - loc) / scale
    b = (hi - loc) / scale
    mass = _interval_mass(a, b)
    if np.any(mass < _MIN_MASS):
        raise NumericalError(
            "truncation interval carries no probability mass for "
            f"{int(np.sum(mass < _MIN_MASS))} input(s); refusing to fabricate moments"
        )
    phi_a = _phi(a)
    phi_b = _phi(b)
    delta = (phi_a - phi_b) / mass
    mean = loc + scale * delta
    var_ratio = 1.0 + (a * phi_a - b * phi_b) / mass - delta * delta
    std = scale * np.sqrt(np.maximum(var_ratio, 0.0))
    return mean, std


def fit_truncated(mu: float, sigma: float, lambda_scale: float) -> TruncGaussian:
    """Fit a [0, 2.5]-truncated Gaussian with location ``mu`` and scale
    ``lambda_scale * sigma``; a zero scale collapses to a clamped point mass."""
    if sigma < 0.0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if lambda_scale <= 0.0:
        raise ValueError(f"lambda_scale must be positive, got {lambda_scale}")
    s = lambda_scale * sigma
    if s == 0.0:
        clamped = min(max(mu, SCORE_MIN), SCORE_MAX)
        return TruncGaussian(mu, 0.0, SCORE_MIN, SCORE_MAX, clamped, 0.0)
    mean, std = _trunc_moments(np.float64(mu), np.float64(s))
    return TruncGaussian(float(mu), float(s), SCORE_MIN, SCORE_MAX, float(mean), float(std))


@dataclass(frozen=True)
class IntervalResult:
    """Calibrated location, uncertainty and a clipped z-interval for one instance."""

    instance_id: str
    lambda_scale: float
    mean_hat: float
    std_hat: float
    lower: float
    upper: float


def fit_intervals(
    dataset: Dataset, lambda_scale: float, z: float = 1.0
) -> list[IntervalResult]:
    """Fit every instance and report mean_hat +/- z*std_hat clipped to [0, 2.5]."""
    results = []
    for instance in dataset:
        mu, sigma, _ = summarize_distribution(instance)
        fit = fit_truncated(mu, sigma, lambda_scale)
        lower = max(fit.mean_hat - z * fit.std_hat, SCORE_MIN)
        upper = min(fit.mean_hat + z * fit.std_hat, SCORE_MAX)
        results.append(
            IntervalResult(instance.id, lambda_scale, fit.mean_hat, fit.std_hat, lower, upper)
        )
    return results


def ups(abs_errors, stds) -> float:
    """Uncertainty Pearson Score: correlation of |error| with uncertainty."""
    return pearson(abs_errors, stds)


def risk_from_ups(value: float) -> float:
    """Map a correlation to the calibration risk 1 - ReLU(UPS)."""
    return 1.0 - max(0.0, float(value))


@dataclass
class _MomentCache:
    """Per-dataset empirical moments plus human scores, computed once."""

    ids: list[str]
    mu: np.ndarray
    sigma: np.ndarray
    human: np.ndarray


def _cache_moments(dataset: Dataset) -> _MomentCache:
    ids, mus, sigmas, human = [], [], [], []
    for instance in dataset:
        if instance.human_score is None:
            raise MissingLabelError(
                f"instance {instance.id!r} carries no human score"
            )
        mu, sigma, _ = summarize_distribution(instance)
        ids.append(instance.id)
        mus.append(mu)
        sigmas.append(sigma)
        human.append(float(instance.human_score))
    return _MomentCache(
        ids,
        np.asarray(mus, dtype=np.float64),
        np.asarray(sigmas, dtype=np.float64),
        np.asarray(human, dtype=np.float64),
    )


def _fitted_moments(cache: _MomentCache, lambda_scale: float) -> tuple[np.ndarray, np.ndarray]:
    scale = lambda_scale * cache.sigma
    mean = np.empty_like(cache.mu)
    std = np.zeros_like(cache.mu)
    degenerate = scale == 0.0
    mean[degenerate] = np.clip(cache.mu[degenerate], SCORE_MIN, SCORE_MAX)
    if np.any(~degenerate):
        mean[~degenerate], std[~degenerate] = _trunc_moments(
            cache.mu[~degenerate], scale[~degenerate]
        )
    return mean, std


def _upr_from_cache(cache: _MomentCache, lambda_scale: float, warn: bool = True) -> float:
    mean, std = _fitted_moments(cache, lambda_scale)
    errors = np.abs(mean - cache.human)
    try:
        return risk_from_ups(pearson(errors, std))
    except ZeroVariance:
        if warn:
            warnings.warn(
                f"UPS undefined at scale {lambda_scale:g} (constant errors or "
                "uncertainties); treating risk as 1",
                RuntimeWarning,
                stacklevel=3,
            )
        return 1.0


def upr_risk(dataset: Dataset, lambda_scale: float) -> float:
    """Dataset-level calibration risk 1 - ReLU(UPS) at one scaling factor.

    An undefined correlation (constant uncertainties or errors) counts as the
    worst-case risk 1 and emits a RuntimeWarning as the diagnostic flag.
    """
    if lambda_scale <= 0.0:
        raise ValueError(f"lambda_scale must be positive, got {lambda_scale}")
    return _upr_from_cache(_cache_moments(dataset), lambda_scale)


def step1_alpha(dataset: Dataset) -> float:
    """Risk tolerance anchored at the unscaled fit (scaling factor 1)."""
    return upr_risk(dataset, 1.0)


def default_scale_grid(num: int = 201, lo: float = 0.1, hi: float = 10.0) -> np.ndarray:
    """Geometric grid of candidate scaling factors.

    With the default odd count the grid contains exactly 1.0, so the
    unscaled fit is always among the candidates.
    """
    if num < 2 or lo <= 0 or hi <= lo:
        raise ValueError("need num >= 2 and 0 < lo < hi")
    return np.power(10.0, np.linspace(math.log10(lo), math.log10(hi), num))


def calibrate_intervals(dataset: Dataset, spec, tau_drop_warning: float = 0.02) -> "CalibrationResult":
    """Select the uncertainty scaling factor through the multiple-testing path.

    The tolerance defaults to the unscaled risk (spec.alpha = None); the
    accepted set keeps every scale whose p-value clears the corrected
    threshold, and the reported scale is the accepted one with the lowest
    p-value.  Human-correlation diagnostics (Kendall tau-c before and after)
    ride along in the result, with a warning when calibration costs more
    than ``tau_drop_warning`` of rank correlation.
    """
    from . import riskcal  # deferred to keep module import acyclic

    if spec.risk_kind is not riskcal.RiskKind.UPR:
        raise ValueError("calibrate_intervals requires an upr risk spec")
    cache = _cache_moments(dataset)
    grid = np.asarray(spec.lambda_grid, dtype=np.float64)
    alpha = spec.alpha if spec.alpha is not None else _upr_from_cache(cache, 1.0)
    risks = np.array([_upr_from_cache(cache, lam, warn=False) for lam in grid])
    result = riskcal.ltt_select(
        grid, risks, dataset.n, alpha, spec.delta, spec.bound, tie_anchor=1.0
    )
    result.diagnostics["alpha"] = float(alpha)
    result.diagnostics["ups_unscaled"] = 1.0 - _upr_from_cache(cache, 1.0)
    if result.lambda_hat is not None:
        result.diagnostics["ups_calibrated"] = 1.0 - _upr_from_cache(
            cache, result.lambda_hat
        )
        try:
            mean_pre, _ = _fitted_moments(cache, 1.0)
            mean_post, _ = _fitted_moments(cache, result.lambda_hat)
            tau_pre = kendall_tau_c(mean_pre, cache.human)
            tau_post = kendall_tau_c(mean_post, cache.human)
            result.diagnostics["tau_c_unscaled"] = tau_pre
            result.diagnostics["tau_c_calibrated"] = tau_post
            if tau_pre - tau_post > tau_drop_warning:
                warnings.warn(
                    f"calibration moved kendall tau-c from {tau_pre:.4f} to "
                    f"{tau_post:.4f}; human-score alignment degraded",
                    RuntimeWarning,
                    stacklevel=2,
                )
        except Exception:  # degenerate rating scales are a diagnostic no-op
            pass
    return result
