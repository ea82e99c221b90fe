"""Empirical risk, monotone risk-control calibration, and the multiple-testing
(learn-then-test) calibration path with family-wise error control.

The monotone path inverts a concentration bound into an upper confidence
bound on the true risk at every candidate threshold and keeps the smallest
threshold whose entire right tail stays below the tolerance.  The
learn-then-test path instead treats every candidate as the null hypothesis
"risk exceeds the tolerance", converts the same bound into a conservative
p-value, and keeps the candidates that survive a Bonferroni correction.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .concentration import (
    BoundParams,
    TailBound,
    g_bentkus,
    g_hb,
    g_hoeffding,
    ucb,
)
from .errors import (
    EmptyAcceptedSet,
    LabelError,
    MissingLabelError,
    NoFeasibleLambda,
)
from .scoredata import Dataset
from .wordscore import ErrorScoreVector, Mode, PredictionSet, error_scores, predict


class RiskKind(str, Enum):
    FDR = "fdr"
    FPR = "fpr"
    UPR = "upr"


class CalibrationMethod(str, Enum):
    MONOTONE_UCB = "monotone_ucb"
    LTT = "ltt"


def default_threshold_grid(num: int = 1001) -> np.ndarray:
    """Evenly spaced candidate thresholds on [0, 1]."""
    if num < 2:
        raise ValueError("need at least two grid points")
    return np.linspace(0.0, 1.0, num)


@dataclass
class RiskSpec:
    """Which risk to control, at what tolerance, over which candidates."""

    risk_kind: RiskKind
    alpha: float | None
    delta: float
    lambda_grid: np.ndarray
    mode: Mode = Mode.MULTILABEL
    bound: TailBound = TailBound.HOEFFDING_BENTKUS

    def __post_init__(self):
        self.risk_kind = RiskKind(self.risk_kind)
        self.mode = Mode(self.mode)
        self.bound = TailBound(self.bound)
        self.lambda_grid = np.asarray(self.lambda_grid, dtype=np.float64)
        if self.lambda_grid.ndim != 1 or len(self.lambda_grid) < 1:
            raise ValueError("lambda_grid must be a non-empty vector")
        if not np.all(np.isfinite(self.lambda_grid)):
            raise ValueError("lambda_grid must be finite")
        if np.any(np.diff(self.lambda_grid) <= 0.0):
            raise ValueError("lambda_grid must be strictly increasing")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.alpha is None:
            if self.risk_kind is not RiskKind.UPR:
                raise ValueError("alpha may be omitted only for the upr risk")
        elif not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.risk_kind is RiskKind.UPR and np.any(self.lambda_grid <= 0.0):
            raise ValueError("scaling grid must be positive for the upr risk")


@dataclass
class CalibrationResult:
    """Selected threshold plus the full bound or p-value table behind it."""

    method: CalibrationMethod
    grid: np.ndarray
    r_hat: np.ndarray
    lambda_hat: float | None = None
    r_plus: np.ndarray | None = None
    p_values: np.ndarray | None = None
    accepted: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ucb_curve(self) -> list[tuple[float, float, float]]:
        if self.r_plus is None:
            return []
        return [
            (float(l), float(r), float(u))
            for l, r, u in zip(self.grid, self.r_hat, self.r_plus)
        ]

    @property
    def p_table(self) -> list[tuple[float, float]]:
        if self.p_values is None:
            return []
        return [(float(l), float(p)) for l, p in zip(self.grid, self.p_values)]

    def to_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "lambda_hat": None if self.lambda_hat is None else float(self.lambda_hat),
            "grid": [float(x) for x in self.grid],
            "r_hat": [float(x) for x in self.r_hat],
            "diagnostics": {
                k: (v.value if isinstance(v, Enum) else v)
                for k, v in sorted(self.diagnostics.items())
            },
        }
        if self.r_plus is not None:
            out["r_plus"] = [float(x) for x in self.r_plus]
        if self.p_values is not None:
            out["p_values"] = [float(x) for x in self.p_values]
        if self.accepted is not None:
            out["accepted"] = [float(x) for x in self.accepted]
        return out


# ---------------------------------------------------------------------------
# losses

def instance_loss(
    pred: PredictionSet,
    labels: frozenset[int] | set[int],
    maskable: frozenset[int] | set[int],
    kind: RiskKind,
) -> float:
    """Per-instance loss in [0, 1]; empty denominators contribute zero."""
    kind = RiskKind(kind)
    labels = set(labels)
    maskable = set(maskable)
    if not labels <= maskable:
        raise LabelError(
            f"labels {sorted(labels - maskable)} fall outside the maskable words"
        )
    selected = set(pred.selected)
    false_positives = len(selected - labels)
    if kind is RiskKind.FDR:
        return false_positives / len(selected) if selected else 0.0
    if kind is RiskKind.FPR:
        negatives = len(maskable - labels)
        return false_positives / negatives if negatives else 0.0
    raise ValueError("instance_loss handles fdr and fpr only")


def _loss_curve(
    scores: np.ndarray,
    is_foil: np.ndarray,
    grid: np.ndarray,
    kind: RiskKind,
    mode: Mode,
) -> np.ndarray:
    """Loss of one instance at every grid threshold, as a (G,) vector.

    ``scores`` are the maskable words' error scores in word order and
    ``is_foil`` flags the labelled ones.  Matches instance_loss exactly.
    """
    n_words = len(scores)
    if n_words == 0:
        return np.zeros(len(grid))
    if mode is Mode.MULTICLASS:
        best = int(np.argmax(scores))
        top = scores[best]
        hit = bool(is_foil[best])
        if kind is RiskKind.FDR:
            miss_loss = 0.0 if hit else 1.0
        else:
            negatives = int(np.sum(~is_foil))
            miss_loss = 0.0 if (hit or negatives == 0) else 1.0 / negatives
        return np.where(grid < top, miss_loss, 0.0)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    fp_prefix = np.concatenate(([0], np.cumsum(~is_foil[order])))
    count = n_words - np.searchsorted(sorted_scores[::-1], grid, side="right")
    if kind is RiskKind.FDR:
        sizes = np.arange(n_words + 1, dtype=np.float64)
        sizes[0] = 1.0  # avoid 0/0; the k=0 loss is 0 by convention
        table = fp_prefix / sizes
        return table[count]
    negatives = int(np.sum(~is_foil))
    if negatives == 0:
        return np.zeros(len(grid))
    return fp_prefix[count] / negatives


def _instance_curve_inputs(instance, fv: ErrorScoreVector):
    if instance.foil_labels is None:
        raise MissingLabelError(f"instance {instance.id!r} carries no foil labels")
    is_foil = np.array([j in instance.foil_labels for j in fv.indices], dtype=bool)
    return fv.scores, is_foil


def empirical_risk(dataset: Dataset, lam: float, spec: RiskSpec) -> float:
    """Mean per-instance loss at one threshold (or the upr risk at one scale)."""
    if spec.risk_kind is RiskKind.UPR:
        from . import intervals

        return intervals.upr_risk(dataset, lam)
    losses = []
    for instance in dataset:
        if instance.foil_labels is None:
            raise MissingLabelError(f"instance {instance.id!r} carries no foil labels")
        fv = error_scores(instance)
        pred = predict(fv, lam, spec.mode)
        losses.append(
            instance_loss(pred, instance.foil_labels, instance.maskable_indices, spec.risk_kind)
        )
    return float(np.mean(np.asarray(losses, dtype=np.float64)))


def risk_curve(dataset: Dataset, spec: RiskSpec) -> np.ndarray:
    """Empirical risk at every grid point; equals empirical_risk pointwise."""
    grid = spec.lambda_grid
    if spec.risk_kind is RiskKind.UPR:
        from . import intervals

        cache = intervals._cache_moments(dataset)
        return np.array(
            [intervals._upr_from_cache(cache, lam, warn=False) for lam in grid]
        )
    mat = np.empty((len(grid), dataset.n), dtype=np.float64)
    for i, instance in enumerate(dataset):
        fv = error_scores(instance)
        scores, is_foil = _instance_curve_inputs(instance, fv)
        mat[:, i] = _loss_curve(scores, is_foil, grid, spec.risk_kind, spec.mode)
    return np.mean(mat, axis=1)


# ---------------------------------------------------------------------------
# calibration paths

def _ucb_chunk(args):
    values, n, delta, bound = args
    params = BoundParams(n=n, delta=delta)
    return {v: ucb(v, params, bound) for v in values}


def _ucb_values(risks: np.ndarray, params: BoundParams, bound: TailBound, workers: int) -> np.ndarray:
    unique = sorted(set(float(r) for r in risks))
    if workers <= 1 or len(unique) < 4 * workers:
        table = _ucb_chunk((unique, params.n, params.delta, bound))
    else:
        chunks = [unique[i::workers] for i in range(workers)]
        table = {}
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = [
                pool.submit(_ucb_chunk, (chunk, params.n, params.delta, bound))
                for chunk in chunks
                if chunk
            ]
            for job in jobs:
                table.update(job.result())
    return np.array([table[float(r)] for r in risks])


def monotone_select(grid: np.ndarray, r_plus: np.ndarray, alpha: float) -> float:
    """Smallest grid point whose entire right tail of bounds is below alpha."""
    tail_max = np.maximum.accumulate(r_plus[::-1])[::-1]
    feasible = tail_max <= alpha
    if not np.any(feasible):
        raise NoFeasibleLambda(
            f"no grid threshold keeps the UCB below alpha={alpha:g}; "
            f"smallest tail bound is {float(tail_max.min()):.6f}"
        )
    return float(grid[int(np.argmax(feasible))])


def calibrate_monotone(dataset: Dataset, spec: RiskSpec, workers: int = 1) -> CalibrationResult:
    """Smallest grid threshold whose upper-confidence tail stays below alpha."""
    if spec.risk_kind not in (RiskKind.FDR, RiskKind.FPR):
        raise ValueError("the monotone path handles fdr and fpr risks")
    if spec.alpha is None:
        raise ValueError("the monotone path needs an explicit alpha")
    risks = risk_curve(dataset, spec)
    params = BoundParams(n=dataset.n, delta=spec.delta)
    r_plus = _ucb_values(risks, params, spec.bound, workers)
    result = CalibrationResult(
        method=CalibrationMethod.MONOTONE_UCB,
        grid=spec.lambda_grid,
        r_hat=risks,
        r_plus=r_plus,
        diagnostics={
            "n": dataset.n,
            "alpha": float(spec.alpha),
            "delta": float(spec.delta),
            "bound": spec.bound.value,
            "risk": spec.risk_kind.value,
            "mode": spec.mode.value,
        },
    )
    try:
        result.lambda_hat = monotone_select(spec.lambda_grid, r_plus, spec.alpha)
    except NoFeasibleLambda as exc:
        exc.result = result
        raise
    return result


def _p_value(risk: float, alpha: float, n: int, bound: TailBound) -> float:
    """Conservative p-value for the null 'true risk exceeds alpha'."""
    risk = min(max(float(risk), 0.0), 1.0)
    if alpha <= 0.0 or alpha >= 1.0:
        # the Hoeffding form is undefined at the endpoints; Bentkus still applies
        p = g_bentkus(risk, float(alpha), n)
    elif bound is TailBound.HOEFFDING:
        p = g_hoeffding(risk, alpha, n)
    elif bound is TailBound.BENTKUS:
        p = g_bentkus(risk, alpha, n)
    else:
        p = g_hb(risk, alpha, n)
    return min(max(p, 0.0), 1.0)


def fwer_uncorrected(delta: float, num_tests: int) -> float:
    """Family-wise error of testing every hypothesis at level delta."""
    if not 0.0 <= delta <= 1.0 or num_tests < 1:
        raise ValueError("need delta in [0, 1] and at least one test")
    return 1.0 - (1.0 - delta) ** num_tests


def ltt_select(
    grid: np.ndarray,
    risks: np.ndarray,
    n: int,
    alpha: float,
    delta: float,
    bound: TailBound = TailBound.HOEFFDING_BENTKUS,
    tie_anchor: float = 1.0,
) -> CalibrationResult:
    """Bonferroni-corrected selection over precomputed empirical risks.

    Every candidate whose p-value clears delta/len(grid) enters the accepted
    set; the reported candidate has the lowest p-value, with exact ties
    resolved toward the candidate closest to ``tie_anchor`` and then toward
    the larger one.  Raises EmptyAcceptedSet (carrying the full table as its
    ``result`` attribute) when nothing clears the threshold.
    """
    grid = np.asarray(grid, dtype=np.float64)
    risks = np.asarray(risks, dtype=np.float64)
    threshold = delta / len(grid)
    p_values = np.array([_p_value(r, alpha, n, bound) for r in risks])
    accepted_mask = p_values < threshold
    result = CalibrationResult(
        method=CalibrationMethod.LTT,
        grid=grid,
        r_hat=risks,
        p_values=p_values,
        accepted=grid[accepted_mask],
        diagnostics={
            "n": int(n),
            "alpha": float(alpha),
            "delta": float(delta),
            "bound": TailBound(bound).value,
            "per_test_level": threshold,
            "fwer_uncorrected_at_delta": fwer_uncorrected(delta, len(grid)),
        },
    )
    if not np.any(accepted_mask):
        exc = EmptyAcceptedSet(
            f"no candidate clears the per-test level {threshold:.3g} "
            f"(min p-value {float(p_values.min()):.3g})"
        )
        exc.result = result
        raise exc
    p_min = float(p_values[accepted_mask].min())
    candidates = np.flatnonzero(accepted_mask & (p_values == p_min))
    best = min(candidates, key=lambda i: (abs(grid[i] - tie_anchor), -grid[i]))
    result.lambda_hat = float(grid[best])
    return result


def ltt_calibrate(dataset: Dataset, spec: RiskSpec, select: str = "min_p") -> CalibrationResult:
    """Learn-then-test calibration over the grid carried by ``spec``.

    Works for any risk kind; for the upr risk an omitted alpha defaults to
    the unscaled risk, mirroring the interval-calibration procedure.
    """
    if select != "min_p":
        raise ValueError(f"unknown selection rule {select!r}")
    alpha = spec.alpha
    if alpha is None:
        from . import intervals

        alpha = intervals.step1_alpha(dataset)
    risks = risk_curve(dataset, spec)
    result = ltt_select(
        spec.lambda_grid, risks, dataset.n, alpha, spec.delta, spec.bound, tie_anchor=1.0
    )
    result.diagnostics["risk"] = spec.risk_kind.value
    result.diagnostics["mode"] = spec.mode.value
    return result


def resolve_workers(workers: int | None) -> int:
    """CLI worker count, falling back to the RISKCTL_WORKERS environment knob."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("RISKCTL_WORKERS", "").strip()
    return max(1, int(env)) if env else 1
