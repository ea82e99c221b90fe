"""Walkthrough: calibrated confidence intervals for caption scores.

Each instance carries a whole distribution of masked scores; fitting a
Gaussian truncated to the score support [0, 2.5] turns it into a location
(mean_hat) and an uncertainty (std_hat).  The scaling factor applied to the
standard deviation before the fit is selected by multiple hypothesis
testing so that uncertainties correlate with the actual deviation from
human scores (UPS), with family-wise error control.

Run:  python demos/02_interval_calibration_walkthrough.py
"""

import warnings

import numpy as np

from riskctl import (
    RiskKind,
    RiskSpec,
    SynthConfig,
    calibrate_intervals,
    default_scale_grid,
    fit_truncated,
    generate_interval,
    kendall_tau_c,
    step1_alpha,
    upr_risk,
)
from riskctl.intervals import fit_intervals

warnings.filterwarnings("ignore", category=RuntimeWarning)

# --- 1. data whose uncertainties are off by a factor of two -------------------
config = SynthConfig(n_cal=600, n_test=600, seed=21, interval_noise_scale=2.0)
cal, test = generate_interval(config)
print(f"calibration set: {cal.n} instances with human scores")

# --- 2. the truncated-Gaussian fit at one glance ------------------------------
fit = fit_truncated(mu=2.3, sigma=0.6, lambda_scale=1.0)
print(
    f"\nraw moments (2.30, 0.60) near the upper bound refit to "
    f"mean_hat={fit.mean_hat:.3f}, std_hat={fit.std_hat:.3f}"
)

# --- 3. tolerance anchored at the unscaled fit --------------------------------
alpha = step1_alpha(cal)
print(f"\nunscaled risk (anchors the tolerance): alpha = {alpha:.4f}")
print(f"equivalently, unscaled UPS = {1 - alpha:.4f}")

# --- 4. select the scaling factor with FWER control ---------------------------
spec = RiskSpec(
    risk_kind=RiskKind.UPR,
    alpha=None,          # anchored at the unscaled fit
    delta=0.10,
    lambda_grid=default_scale_grid(201),
)
result = calibrate_intervals(cal, spec)
print(f"\naccepted scales: {len(result.accepted)} of {len(result.grid)} candidates")
print(f"accepted range: [{result.accepted.min():.3f}, {result.accepted.max():.3f}]")
print(f"selected scale lambda_hat = {result.lambda_hat:.3f} (hidden truth: 2.0)")

ups_before = 1.0 - upr_risk(cal, 1.0)
ups_after = 1.0 - upr_risk(cal, result.lambda_hat)
print(f"\nUPS before -> after calibration: {100*ups_before:.1f} -> {100*ups_after:.1f} (x100)")
print(f"held-out UPS at lambda_hat: {100*(1.0 - upr_risk(test, result.lambda_hat)):.1f}")

# --- 5. ranking against human scores is preserved -----------------------------
human = np.array([i.human_score for i in cal])
for scale, label in [(1.0, "before"), (result.lambda_hat, "after")]:
    mean_hat = np.array([r.mean_hat for r in fit_intervals(cal, scale)])
    tau = kendall_tau_c(mean_hat, np.round(human, 1))
    print(f"kendall tau-c vs human scores {label}: {tau:.4f}")

# --- 6. intervals as presentation --------------------------------------------
bands = fit_intervals(cal, result.lambda_hat, z=1.0)[:5]
print("\nfirst five calibrated intervals (mean_hat +/- std_hat, clipped):")
for band in bands:
    print(f"  {band.instance_id}: [{band.lower:.3f}, {band.upper:.3f}] around {band.mean_hat:.3f}")
