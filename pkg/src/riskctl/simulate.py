"""Synthetic score distributions with known ground truth, plus Monte-Carlo
validation that calibrated thresholds keep the risk below tolerance at the
advertised confidence.

Detection synthesis draws one latent contribution per word (positive mean
for planted foils, negative for clean words), clips it to the band the score
range can represent, and encodes it as single-word mask samples around a
constant base score, so the scoring pipeline recovers the latent values
exactly.  An optional multi-word mode wraps the same latents in overlapping
masks to exercise the evidence-weighted aggregation.

All randomness flows through counter-based Philox substreams keyed on
(seed, trial, part, instance), so generation order and worker count cannot
change the output.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .concentration import BoundParams
from .errors import ConfigError, NoFeasibleLambda
from .riskcal import (
    CalibrationResult,
    RiskKind,
    RiskSpec,
    _loss_curve,
    _ucb_values,
    monotone_select,
)
from .scoredata import Dataset, MaskSample, ScoredInstance, Split, WordToken
from .wordscore import Mode, sigmoid

_BASE_SCORE = 1.25          # keeps base + contribution inside [0, 2.5]
_CONTRIBUTION_LIMIT = 1.25  # largest latent a [0, 2.5] score matrix can encode
_INTERVAL_SAMPLES = 160


@dataclass
class SynthConfig:
    """Knobs for the synthetic generators; a fixed seed fixes every byte."""

    n_cal: int
    n_trials: int = 1
    n_test: int | None = None  # defaults to 20x n_cal
    words_per_caption: int = 8
    foils_per_caption: int | tuple[int, int] = 1
    separation: float = 0.75
    noise: float = 0.5
    seed: int = 0
    mode: Mode = Mode.MULTILABEL
    interval_noise_scale: float = 1.0
    mask_words: int = 1
    interval_samples: int = _INTERVAL_SAMPLES

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.n_cal < 1 or self.n_trials < 1 or self.words_per_caption < 1:
            raise ConfigError("counts must be at least 1")
        if self.n_test is None:
            self.n_test = 20 * self.n_cal
        if self.n_test < 1:
            raise ConfigError("test pool must hold at least one instance")
        if self.noise <= 0.0:
            raise ConfigError("noise must be positive")
        if isinstance(self.foils_per_caption, (tuple, list)):
            lo, hi = self.foils_per_caption
            if not (0 <= lo <= hi <= self.words_per_caption):
                raise ConfigError("foil range must satisfy 0 <= lo <= hi <= words")
            self.foils_per_caption = (int(lo), int(hi))
        else:
            k = int(self.foils_per_caption)
            if not 0 <= k <= self.words_per_caption:
                raise ConfigError("foil count must fit in the caption")
            self.foils_per_caption = k
        if not 1 <= self.mask_words <= self.words_per_caption:
            raise ConfigError("mask width must fit in the caption")
        if self.interval_noise_scale < 0.0:
            raise ConfigError("interval_noise_scale must be non-negative")
        if self.interval_samples < 2:
            raise ConfigError("need at least two samples per interval instance")


@dataclass
class GuaranteeReport:
    """Outcome of repeated calibrate-then-test trials."""

    violations: int
    trials: int
    violation_rate: float
    target_alpha: float
    target_delta: float
    mean_test_risk: float
    mean_cal_risk: float
    mean_lambda_hat: float
    calibration_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "violations": self.violations,
            "trials": self.trials,
            "violation_rate": self.violation_rate,
            "target_alpha": self.target_alpha,
            "target_delta": self.target_delta,
            "mean_test_risk": self.mean_test_risk,
            "mean_cal_risk": self.mean_cal_risk,
            "mean_lambda_hat": self.mean_lambda_hat,
            "calibration_failures": self.calibration_failures,
        }


@dataclass
class TrialRecord:
    trial: int
    failed: bool
    lambda_hat: float | None
    cal_risk: float | None
    test_risk: float | None
    violation: bool


_MASK64 = (1 << 64) - 1


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _substream(seed: int, *path: int) -> np.random.Generator:
    """Independent counter-based stream for one (trial, part, instance) cell."""
    key = _splitmix(seed & _MASK64)
    for part in path:
        key = _splitmix(key ^ ((part + 1) & _MASK64))
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# detection synthesis

def _detection_cell(config: SynthConfig, trial: int, part: int, index: int):
    """Latent contributions and foil flags for one synthetic caption."""
    rng = _substream(config.seed, trial, part, index)
    L = config.words_per_caption
    if isinstance(config.foils_per_caption, tuple):
        lo, hi = config.foils_per_caption
        k = int(rng.integers(lo, hi + 1))
    else:
        k = config.foils_per_caption
    is_foil = np.zeros(L, dtype=bool)
    if k > 0:
        is_foil[rng.choice(L, size=k, replace=False)] = True
    signs = np.where(is_foil, 1.0, -1.0)
    latent = signs * config.separation + rng.normal(0.0, config.noise, size=L)
    latent = np.clip(latent, -_CONTRIBUTION_LIMIT, _CONTRIBUTION_LIMIT)
    return latent, is_foil


def _detection_matrices(config: SynthConfig, trial: int, part: int, count: int):
    """Score matrix rows (count x L) and foil flags for one split."""
    L = config.words_per_caption
    scores = np.empty((count, L), dtype=np.float64)
    labels = np.empty((count, L), dtype=bool)
    for i in range(count):
        latent, is_foil = _detection_cell(config, trial, part, i)
        scores[i] = _BASE_SCORE + latent
        labels[i] = is_foil
    return scores, labels


def _detection_instance(
    config: SynthConfig, instance_id: str, score_row: np.ndarray, is_foil: np.ndarray
) -> ScoredInstance:
    L = config.words_per_caption
    words = [WordToken(index=j, surface=f"w{j}", pos="NOUN") for j in range(L)]
    base = np.array([_BASE_SCORE])
    samples = []
    if config.mask_words == 1:
        for j in range(L):
            samples.append(MaskSample(masked=frozenset({j}), scores=score_row[j : j + 1]))
    else:
        latent = score_row - _BASE_SCORE
        w = config.mask_words
        for t in range(L):
            members = frozenset((t + u) % L for u in range(w))
            pooled = float(np.mean(latent[sorted(members)]))
            samples.append(
                MaskSample(masked=members, scores=np.array([_BASE_SCORE + pooled]))
            )
    return ScoredInstance(
        id=instance_id,
        words=words,
        base_scores=base,
        mask_samples=samples,
        foil_labels=frozenset(int(j) for j in np.flatnonzero(is_foil)),
    )


def generate_detection(config: SynthConfig, trial: int = 0) -> tuple[Dataset, Dataset]:
    """Calibration and test datasets with known per-word ground truth."""
    out = []
    for part, (split, count) in enumerate(
        [(Split.CALIBRATION, config.n_cal), (Split.TEST, config.n_test)]
    ):
        scores, labels = _detection_matrices(config, trial, part, count)
        instances = [
            _detection_instance(config, f"t{trial}-{split.value}-{i}", scores[i], labels[i])
            for i in range(count)
        ]
        for instance in instances:
            instance.validate()
        out.append(Dataset(tuple(instances), split))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# interval synthesis

def _interval_instance(config: SynthConfig, trial: int, part: int, index: int) -> ScoredInstance:
    from .intervals import _trunc_moments  # local import avoids a cycle

    rng = _substream(config.seed, trial, part, index)
    center = rng.uniform(0.1, 2.4)
    spread = float(np.clip(rng.lognormal(mean=np.log(0.4), sigma=1.0), 0.05, 1.5))
    rho = config.interval_noise_scale
    if rho == 0.0:
        spread = 0.0
    draws = np.clip(
        rng.normal(center, spread, size=config.interval_samples), 0.0, 2.5
    )
    mu_emp = float(np.mean(draws))
    sd_emp = float(np.std(draws))
    if rho == 0.0 or sd_emp == 0.0:
        human = mu_emp
    else:
        # the human score deviates from the rho-scaled fit by (almost exactly)
        # that fit's own uncertainty, so rescaling by rho is what aligns
        # uncertainties with errors
        mean_rho, std_rho = _trunc_moments(np.float64(mu_emp), np.float64(rho * sd_emp))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        magnitude = abs(1.0 + rng.normal(0.0, 0.25))
        human = float(mean_rho + sign * magnitude * std_rho)
    samples = [
        MaskSample(masked=frozenset({0}), scores=draws[t : t + 1])
        for t in range(config.interval_samples)
    ]
    return ScoredInstance(
        id=f"t{trial}-i{part}-{index}",
        words=[WordToken(index=0, surface="w0", pos="NOUN")],
        base_scores=np.array([min(max(center, 0.0), 2.5)]),
        mask_samples=samples,
        human_score=human,
        full_score=min(max(center, 0.0), 2.5),
    )


def generate_interval(config: SynthConfig, trial: int = 0) -> tuple[Dataset, Dataset]:
    """Datasets whose hidden uncertainty scale is interval_noise_scale.

    Human scores sit at the truncated-fit mean for the hidden scale, offset
    by noise proportional to the truncated-fit std at that scale, so the
    error/uncertainty correlation peaks near the hidden scale.
    """
    out = []
    for part, (split, count) in enumerate(
        [(Split.CALIBRATION, config.n_cal), (Split.TEST, config.n_test)], start=2
    ):
        instances = [_interval_instance(config, trial, part, i) for i in range(count)]
        for instance in instances:
            instance.validate()
        out.append(Dataset(tuple(instances), split))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# guarantee validation

def _matrix_fv(scores: np.ndarray) -> np.ndarray:
    return sigmoid(scores - _BASE_SCORE)


def _matrix_risk_curve(
    fv: np.ndarray, labels: np.ndarray, grid: np.ndarray, kind: RiskKind, mode: Mode
) -> np.ndarray:
    mat = np.empty((len(grid), len(fv)), dtype=np.float64)
    for i in range(len(fv)):
        mat[:, i] = _loss_curve(fv[i], labels[i], grid, kind, mode)
    return np.mean(mat, axis=1)


def _matrix_risk_at(
    fv: np.ndarray, labels: np.ndarray, lam: float, kind: RiskKind, mode: Mode
) -> float:
    """Mean loss at one threshold, vectorized over instances.

    Losses are integer-count ratios, so this agrees exactly with the
    per-instance path through riskcal._loss_curve.
    """
    n = len(fv)
    if mode is Mode.MULTICLASS:
        rows = np.arange(n)
        best = np.argmax(fv, axis=1)
        nonempty = fv[rows, best] > lam
        miss = nonempty & ~labels[rows, best]
        if kind is RiskKind.FDR:
            losses = miss.astype(np.float64)
        else:
            negatives = np.sum(~labels, axis=1)
            losses = np.where(negatives > 0, miss / np.maximum(negatives, 1), 0.0)
    else:
        selected = fv > lam
        false_pos = np.sum(selected & ~labels, axis=1)
        if kind is RiskKind.FDR:
            sizes = np.sum(selected, axis=1)
            losses = np.where(sizes > 0, false_pos / np.maximum(sizes, 1), 0.0)
        else:
            negatives = np.sum(~labels, axis=1)
            losses = np.where(negatives > 0, false_pos / np.maximum(negatives, 1), 0.0)
    return float(np.mean(losses))


def _run_trial(args) -> TrialRecord:
    config, spec, trial = args
    if config.mask_words == 1:
        cal_scores, cal_labels = _detection_matrices(config, trial, 0, config.n_cal)
        test_scores, test_labels = _detection_matrices(config, trial, 1, config.n_test)
        cal_fv, test_fv = _matrix_fv(cal_scores), _matrix_fv(test_scores)
        risks = _matrix_risk_curve(cal_fv, cal_labels, spec.lambda_grid, spec.risk_kind, spec.mode)
    else:
        from .riskcal import risk_curve

        cal, test = generate_detection(config, trial)
        risks = risk_curve(cal, spec)
    params = BoundParams(n=config.n_cal, delta=spec.delta)
    r_plus = _ucb_values(risks, params, spec.bound, workers=1)
    try:
        lambda_hat = monotone_select(spec.lambda_grid, r_plus, spec.alpha)
    except NoFeasibleLambda:
        return TrialRecord(trial, True, None, None, None, False)
    grid_pos = int(np.searchsorted(spec.lambda_grid, lambda_hat))
    cal_risk = float(risks[grid_pos])
    if config.mask_words == 1:
        test_risk = _matrix_risk_at(test_fv, test_labels, lambda_hat, spec.risk_kind, spec.mode)
    else:
        from .riskcal import empirical_risk

        test_risk = empirical_risk(test, lambda_hat, spec)
    return TrialRecord(
        trial, False, lambda_hat, cal_risk, test_risk, bool(test_risk > spec.alpha)
    )


def run_trials(
    config: SynthConfig, spec: RiskSpec, workers: int = 1
) -> list[TrialRecord]:
    """Execute every trial; results are ordered by trial index regardless of
    worker count, so the outcome is byte-stable."""
    if spec.risk_kind is RiskKind.UPR:
        raise ConfigError("guarantee validation covers the detection risks")
    if spec.alpha is None:
        raise ConfigError("guarantee validation needs an explicit alpha")
    jobs = [(config, spec, t) for t in range(config.n_trials)]
    if workers <= 1 or config.n_trials == 1:
        return [_run_trial(job) for job in jobs]
    records: list[TrialRecord | None] = [None] * config.n_trials
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        for record in pool.map(_run_trial, jobs, chunksize=max(1, config.n_trials // (4 * workers))):
            records[record.trial] = record
    return records  # type: ignore[return-value]


def aggregate_records(records: Sequence[TrialRecord], spec: RiskSpec) -> GuaranteeReport:
    """Deterministic fixed-order reduction of per-trial outcomes."""
    ok = [r for r in records if not r.failed]
    violations = sum(1 for r in ok if r.violation)
    if ok:
        mean_test = float(np.mean(np.array([r.test_risk for r in ok])))
        mean_cal = float(np.mean(np.array([r.cal_risk for r in ok])))
        mean_lam = float(np.mean(np.array([r.lambda_hat for r in ok])))
    else:
        mean_test = mean_cal = mean_lam = float("nan")
    return GuaranteeReport(
        violations=violations,
        trials=len(ok),
        violation_rate=violations / len(ok) if ok else float("nan"),
        target_alpha=float(spec.alpha),
        target_delta=float(spec.delta),
        mean_test_risk=mean_test,
        mean_cal_risk=mean_cal,
        mean_lambda_hat=mean_lam,
        calibration_failures=len(records) - len(ok),
    )


def validate_guarantee(
    config: SynthConfig, spec: RiskSpec, workers: int = 1
) -> GuaranteeReport:
    """Monte-Carlo check of the calibration guarantee.

    Each trial calibrates on a fresh calibration set and measures the risk
    on a fresh test pool; a violation is a test risk above alpha.  Trials
    whose calibration finds no feasible threshold are counted separately,
    never as violations.
    """
    return aggregate_records(run_trials(config, spec, workers), spec)
