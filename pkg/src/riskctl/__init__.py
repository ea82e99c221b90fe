"""Risk-controlled calibration of CLIPScore distributions.

Turns per-instance score distributions (produced by masking the inputs of a
CLIP model) into risk-controlled foil-word detections and calibrated
confidence intervals, and ships a simulation harness that checks the formal
guarantees empirically.
"""

__version__ = "0.1.0"

from .concentration import BoundParams, TailBound, g_bentkus, g_hb, g_hoeffding, hoeffding_f, ucb
from .intervals import (
    TruncGaussian,
    calibrate_intervals,
    default_scale_grid,
    fit_truncated,
    step1_alpha,
    upr_risk,
    ups,
)
from .metrics import (
    LAVariant,
    MetricReport,
    average_precision,
    instance_prf,
    kendall_tau_c,
    location_accuracy,
    pearson,
    word_prf,
)
from .riskcal import (
    CalibrationMethod,
    CalibrationResult,
    RiskKind,
    RiskSpec,
    calibrate_monotone,
    default_threshold_grid,
    empirical_risk,
    fwer_uncorrected,
    instance_loss,
    ltt_calibrate,
    risk_curve,
)
from .scoredata import (
    Dataset,
    DatasetKind,
    MaskSample,
    ScoredInstance,
    Split,
    WordToken,
    load_dataset,
    summarize_distribution,
    write_dataset,
)
from .simulate import GuaranteeReport, SynthConfig, generate_detection, generate_interval, validate_guarantee
from .wordscore import ErrorScoreVector, Mode, PredictionSet, error_scores, predict, sample_contribution
