"""ROC/AUC with bootstrap intervals, cost-sensitive cut-offs and SICR-rate diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .core import SicrDefinition
from .dataset import LabeledPanel, RateSeries, rates_by_month, series_mae, sicr_rate_series
from .errors import SicrError
from .logit import DEFAULT_RIDGE, fit, predict_panel

log = logging.getLogger(__name__)

DEFAULT_COST_RATIO = 6.0
MAX_REDRAWS = 20


def _labels(labels) -> np.ndarray:
    y = np.asarray(labels).astype(bool)
    if y.all() or not y.any():
        raise SicrError("degenerate-labels")
    return y


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counting one half."""
    s = np.asarray(scores, dtype=float)
    y = _labels(labels)
    if len(s) != len(y):
        raise SicrError("bad-input", "scores and labels differ in length")
    ranks = rankdata(s)
    n1 = int(y.sum())
    n0 = len(y) - n1
    return float((ranks[y].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


class _WeightedAuc:
    """AUC under per-observation multiplicities, reusing one sort of the scores."""

    def __init__(self, scores, y):
        _, self.group = np.unique(scores, return_inverse=True)
        self.n_groups = int(self.group.max()) + 1
        self.y = y

    def __call__(self, weights):
        pos = np.bincount(self.group, weights=weights * self.y, minlength=self.n_groups)
        neg = np.bincount(self.group, weights=weights * ~self.y, minlength=self.n_groups)
        P, N = pos.sum(), neg.sum()
        if P == 0 or N == 0:
            return None
        below = np.cumsum(neg) - neg
        return float(pos @ (below + 0.5 * neg) / (P * N))


@dataclass(frozen=True)
class AucEstimate:
    auc: float
    ci_low: float
    ci_high: float
    replicates: int
    skipped: int = 0

    @property
    def gini(self) -> float:
        return 2.0 * self.auc - 1.0


def replicate_rng(seed, index):
    """Independent stream for bootstrap replicate ``index``."""
    return np.random.default_rng([int(seed), int(index)])


def bootstrap_auc_ci(scores, labels, replicates=1000, seed=0, level=0.95) -> AucEstimate:
    """Case-resampling bootstrap percentile interval for the AUC.

    One-class resamples are redrawn up to ``MAX_REDRAWS`` times and then
    skipped; ``replicates`` on the result counts the usable ones.
    """
    if replicates < 100:
        raise SicrError("bad-input", "at least 100 bootstrap replicates required")
    s = np.asarray(scores, dtype=float)
    y = _labels(labels)
    point = auc(s, y)
    weighted = _WeightedAuc(s, y)
    n = len(s)
    values, skipped = [], 0
    for r in range(replicates):
        rng = replicate_rng(seed, r)
        for _ in range(MAX_REDRAWS):
            counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
            value = weighted(counts)
            if value is not None:
                values.append(value)
                break
        else:
            skipped += 1
    if not values:
        raise SicrError("degenerate-labels", "no usable bootstrap replicates")
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(values, [tail, 100.0 - tail])
    return AucEstimate(point, float(np.clip(low, 0, 1)), float(np.clip(high, 0, 1)),
                       len(values), skipped)


@dataclass(frozen=True)
class CutoffResult:
    c_star: float
    j_a: float
    cost_ratio: float
    prevalence: float
    sensitivity: float
    specificity: float


def candidate_cutoffs(scores) -> np.ndarray:
    """0, 1 and the midpoints between consecutive distinct scores, ascending."""
    u = np.unique(np.asarray(scores, dtype=float))
    mids = (u[:-1] + u[1:]) / 2.0
    return np.unique(np.concatenate(([0.0], mids, [1.0])))


def operating_point(scores, labels, c):
    """Sensitivity ``P(h > c | pos)`` and specificity ``P(h <= c | neg)``."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    return float(np.mean(s[y] > c)), float(np.mean(s[~y] <= c))


def generalised_youden(q, p, prevalence, cost_ratio):
    """``J_a = q + (1 - phi) / (a * phi) * p - 1``."""
    return q + (1.0 - prevalence) / (cost_ratio * prevalence) * p - 1.0


def youden_cutoff(scores, labels, cost_ratio=DEFAULT_COST_RATIO) -> CutoffResult:
    """Cut-off maximising the generalised Youden index over all operating points.

    Prevalence is the positive share of ``labels``. Among equal maxima the
    smallest cut-off wins, which flags more accounts.
    """
    if cost_ratio <= 0:
        raise SicrError("bad-input", "cost ratio must be positive")
    s = np.asarray(scores, dtype=float)
    y = _labels(labels)
    phi = float(y.mean())
    cands = candidate_cutoffs(s)
    pos = np.sort(s[y])
    neg = np.sort(s[~y])
    tp = len(pos) - np.searchsorted(pos, cands, side="right")
    tn = np.searchsorted(neg, cands, side="right")
    q = tp / len(pos)
    p = tn / len(neg)
    j = generalised_youden(q, p, phi, cost_ratio)
    # J_a = (a*TP + TN) / (a*P) - 1: rank on counts so exact ties stay ties
    best = int(np.argmax(cost_ratio * tp + tn))
    return CutoffResult(float(cands[best]), float(j[best]), float(cost_ratio), phi,
                        float(q[best]), float(p[best]))


def dichotomise(scores, cutoff) -> np.ndarray:
    """Binary staging decisions ``h > c`` (strict)."""
    if not 0.0 <= cutoff <= 1.0:
        raise SicrError("bad-input", f"cut-off {cutoff} outside [0, 1]")
    return np.asarray(scores, dtype=float) > cutoff


def discrete_auc(predictions, labels, replicates=1000, seed=0) -> AucEstimate:
    """AUC of 0/1 predictions; equals ``(q + p) / 2`` at the single operating point."""
    return bootstrap_auc_ci(np.asarray(predictions, dtype=float), labels, replicates, seed)


def flexibility(loan_ids, scores) -> float:
    """Mean over loans (with >= 2 scores) of each loan's population SD of scores."""
    frame = pd.DataFrame({"loan": np.asarray(loan_ids), "score": np.asarray(scores, float)})
    grouped = frame.groupby("loan", sort=True)["score"]
    counts = grouped.size()
    sd = grouped.std(ddof=0)[counts >= 2]
    if len(sd) == 0:
        raise SicrError("insufficient-histories")
    return float(sd.mean())


def flexibility_from_mapping(predictions_by_loan: dict) -> float:
    ids, scores = [], []
    for loan, seq in predictions_by_loan.items():
        ids.extend([loan] * len(seq))
        scores.extend(seq)
    return flexibility(ids, scores)


def instability(rates: RateSeries) -> float:
    """Population standard deviation of a monthly rate series."""
    if len(rates) < 2:
        raise SicrError("series-too-short")
    if np.ptp(rates.rate) == 0:
        return 0.0
    return float(np.std(rates.rate))


@dataclass(frozen=True)
class CrisisSummary:
    earliest: float
    maximum: float
    post_crisis_mean: float

    @property
    def early_warning(self) -> float:
        return self.maximum - self.earliest

    @property
    def recovery(self) -> float:
        return self.maximum - self.post_crisis_mean


def crisis_summaries(rates: RateSeries, post_crisis_start: int) -> CrisisSummary:
    """Earliest rate, peak rate and mean rate from ``post_crisis_start`` onward."""
    if len(rates) == 0:
        raise SicrError("empty-series")
    after = rates.months >= post_crisis_start
    if not after.any():
        raise SicrError("post-crisis-beyond-series")
    return CrisisSummary(float(rates.rate[0]), float(rates.rate.max()),
                         float(rates.rate[after].mean()))


def expected_rate_series(model, panel: LabeledPanel, cutoff, scores=None):
    """Expected (mean score) and discrete (mean flag) rates over stage-1 rows.

    Pass ``scores`` to reuse probabilities already computed for ``panel``.
    """
    scores = predict_panel(model, panel) if scores is None else np.asarray(scores, float)
    mask = panel.stage1
    months = panel.months[mask]
    b = rates_by_month(months, scores[mask], "B")
    c = rates_by_month(months, dichotomise(scores[mask], cutoff), "C")
    return b, c


@dataclass
class DefinitionReport:
    label: str
    d: int
    s: int
    k: int
    n_train: int
    n_valid: int
    prevalence: float
    auc: float
    auc_ci_low: float
    auc_ci_high: float
    gini: float
    flexibility: float
    instability: float
    cutoff: float
    j_a: float
    sensitivity: float
    specificity: float
    auc_discrete: float
    auc_discrete_ci_low: float
    auc_discrete_ci_high: float
    rate_earliest: float
    rate_max: float
    rate_post_crisis: float
    early_warning_degree: float
    recovery_degree: float
    mae_m1: float
    mae_m2: float

    def as_dict(self):
        return asdict(self)


@dataclass
class Evaluation:
    """A report together with the series and model it was computed from."""

    report: DefinitionReport
    model: object
    actual: RateSeries
    expected: RateSeries
    discrete: RateSeries


def evaluate_definition(definition: SicrDefinition, panel_train: LabeledPanel,
                        panel_valid: LabeledPanel, cost_ratio=DEFAULT_COST_RATIO,
                        replicates=1000, seed=0, post_crisis_start=None,
                        panel_full: LabeledPanel | None = None, ridge=DEFAULT_RIDGE,
                        fit_options=None) -> Evaluation:
    """Fit on train, score validation and assemble every report metric.

    The actual/expected/discrete rate series use ``panel_full`` (by default
    train and validation together). Bootstrap streams for the probabilistic
    and discrete AUC are derived from ``seed`` as ``(seed, 0)`` and
    ``(seed, 1)``.
    """
    try:
        model = fit(panel_train, ridge=ridge, **(fit_options or {}))
        train_scores = predict_panel(model, panel_train)
        valid_scores = predict_panel(model, panel_valid)
        cut = youden_cutoff(train_scores, panel_train.y, cost_ratio)
        seeds = np.random.SeedSequence(seed).spawn(2)
        s_prob, s_disc = (int(ss.generate_state(1)[0]) for ss in seeds)
        auc_prob = bootstrap_auc_ci(valid_scores, panel_valid.y, replicates, s_prob)
        flags = dichotomise(valid_scores, cut.c_star)
        auc_disc = discrete_auc(flags, panel_valid.y, replicates, s_disc)
        omega = flexibility(panel_valid.loan_ids, valid_scores)

        if panel_full is None:
            panel_full = LabeledPanel(
                pd.concat([panel_train.frame, panel_valid.frame], ignore_index=True),
                panel_train.definition, panel_train.schema)
        full_scores = predict_panel(model, panel_full)
        actual = sicr_rate_series(panel_full)
        expected, discrete = expected_rate_series(model, panel_full, cut.c_star, full_scores)
        sigma = instability(actual)
        if post_crisis_start is None:
            post_crisis_start = int(actual.months[len(actual) // 2])
        crisis = crisis_summaries(actual, post_crisis_start)
    except SicrError as err:
        raise SicrError(err.code, f"[{definition.label}] {err.detail or ''}".strip()) from err

    report = DefinitionReport(
        label=definition.label, d=definition.d, s=definition.s, k=definition.k,
        n_train=len(panel_train), n_valid=len(panel_valid),
        prevalence=float(panel_train.y.mean()),
        auc=auc_prob.auc, auc_ci_low=auc_prob.ci_low, auc_ci_high=auc_prob.ci_high,
        gini=auc_prob.gini, flexibility=omega, instability=sigma,
        cutoff=cut.c_star, j_a=cut.j_a, sensitivity=cut.sensitivity,
        specificity=cut.specificity,
        auc_discrete=auc_disc.auc, auc_discrete_ci_low=auc_disc.ci_low,
        auc_discrete_ci_high=auc_disc.ci_high,
        rate_earliest=crisis.earliest, rate_max=crisis.maximum,
        rate_post_crisis=crisis.post_crisis_mean,
        early_warning_degree=crisis.early_warning, recovery_degree=crisis.recovery,
        mae_m1=series_mae(actual, expected), mae_m2=series_mae(actual, discrete),
    )
    return Evaluation(report, model, actual, expected, discrete)
