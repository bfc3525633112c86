"""Modelling panels: feature engineering, SICR labels, sampling and rates."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .core import SicrDefinition, compute_status, label_outcomes, DEFAULT_THRESHOLD
from .errors import SicrError
from .synth import MACRO_SERIES, PAY_METHODS, Portfolio

log = logging.getLogger(__name__)

THEMES = ("delinquency", "account", "behavioural", "macroeconomic")
TREND_LEVELS = ("down", "flat", "up")

MACRO_FEATURE_NAMES = {
    "repo_rate": "Repo_Rate",
    "inflation_growth": "Inflation_Growth",
    "dti_level": "DTI_Level",
    "real_income_growth": "RealIncome_Growth",
    "employment_growth": "Employment_Growth",
}

ID_COLUMNS = ("loan_id", "month", "y", "stage1")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = "numeric"
    theme: str = "account"
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise SicrError("bad-schema", f"{self.name}: kind {self.kind!r}")
        if self.theme not in THEMES:
            raise SicrError("bad-schema", f"{self.name}: theme {self.theme!r}")
        if self.kind == "categorical" and not self.levels:
            raise SicrError("bad-schema", f"{self.name}: categorical without levels")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list; the single source of design-matrix column order.

    Trailing-window features (``ArrearsTrend_3mo``, ``Num_ArrearsEver_24mo``)
    fall back to whatever shorter history exists at the start of a loan, and
    12-month macro lags clamp to the first available macro month.
    """

    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SicrError("bad-schema", "duplicate feature names")
        clash = set(names) & set(ID_COLUMNS)
        if clash:
            raise SicrError("bad-schema", f"reserved names {sorted(clash)}")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __len__(self):
        return len(self.features)

    def __getitem__(self, name) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def subset(self, names) -> "FeatureSchema":
        return FeatureSchema(tuple(self[n] for n in names))

    def to_records(self) -> list[dict]:
        return [{"name": f.name, "kind": f.kind, "theme": f.theme,
                 "levels": list(f.levels)} for f in self.features]

    @classmethod
    def from_records(cls, records) -> "FeatureSchema":
        return cls(tuple(FeatureSpec(r["name"], r["kind"], r["theme"], tuple(r["levels"]))
                         for r in records))

    def hash(self) -> str:
        blob = json.dumps(self.to_records(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_schema() -> FeatureSchema:
    feats = [
        FeatureSpec("g0_Delinq", "numeric", "delinquency"),
        FeatureSpec("ArrearsTrend_3mo", "categorical", "delinquency", TREND_LEVELS),
        FeatureSpec("Num_ArrearsEver_24mo", "numeric", "delinquency"),
        FeatureSpec("TimeInPerfSpell", "numeric", "delinquency"),
        FeatureSpec("PerfSpell_Num", "numeric", "delinquency"),
        FeatureSpec("InterestRate_Margin", "numeric", "account"),
        FeatureSpec("Term", "numeric", "account"),
        FeatureSpec("BalanceLog", "numeric", "account"),
        FeatureSpec("Prelim_Perc", "numeric", "behavioural"),
        FeatureSpec("PayMethod", "categorical", "behavioural", PAY_METHODS),
    ]
    for series in MACRO_SERIES:
        stem = MACRO_FEATURE_NAMES[series]
        feats.append(FeatureSpec(f"{stem}_0mo", "numeric", "macroeconomic"))
        feats.append(FeatureSpec(f"{stem}_12mo", "numeric", "macroeconomic"))
    return FeatureSchema(tuple(feats))


def _loan_features(loan, macro) -> dict:
    g0 = loan.g0
    n = len(g0)
    pos = np.arange(n)

    back3 = g0[np.maximum(pos - 3, 0)]
    trend = np.where(g0 > back3, "up", np.where(g0 < back3, "down", "flat"))

    arrears = np.concatenate(([0], np.cumsum(g0 > 0)))
    ever24 = arrears[pos] - arrears[np.maximum(pos - 24, 0)]

    in_default = g0 >= DEFAULT_THRESHOLD
    cured = np.zeros(n, dtype=bool)
    cured[1:] = in_default[:-1] & ~in_default[1:]
    spell_num = 1 + np.cumsum(cured)
    # months since the current performing spell began; 0 while in default
    spell_start = np.maximum.accumulate(np.where(cured | (pos == 0), pos, 0))
    time_in_spell = np.where(in_default, 0, pos - spell_start + 1)

    cov = loan.covariates
    out = {
        "loan_id": np.full(n, loan.loan_id),
        "month": loan.months,
        "g0_Delinq": g0.astype(float),
        "ArrearsTrend_3mo": trend.astype(object),
        "Num_ArrearsEver_24mo": ever24.astype(float),
        "TimeInPerfSpell": time_in_spell.astype(float),
        "PerfSpell_Num": spell_num.astype(float),
        "InterestRate_Margin": np.asarray(cov["interest_margin"], dtype=float),
        "Term": np.full(n, float(loan.term_months)),
        "BalanceLog": np.log1p(np.asarray(cov["balance"], dtype=float)),
        "Prelim_Perc": np.asarray(cov["prelim_perc"], dtype=float),
        "PayMethod": np.asarray(cov["pay_method"], dtype=object),
    }
    if macro is not None:
        idx = macro.index_of(loan.months)
        if np.any(idx >= len(macro.months)) or np.any(idx < 0):
            raise SicrError("macro-out-of-range", f"loan {loan.loan_id}")
        for series in MACRO_SERIES:
            stem = MACRO_FEATURE_NAMES[series]
            values = np.asarray(macro.series[series])
            out[f"{stem}_0mo"] = values[idx]
            out[f"{stem}_12mo"] = values[np.maximum(idx - 12, 0)]
    return out


def engineer_features(portfolio: Portfolio) -> pd.DataFrame:
    """All engineered features for every observed loan-month.

    Features depend only on the raw history, never on a SICR definition, so
    one frame can back every panel in a grid.
    """
    parts = [_loan_features(loan, portfolio.macro) for loan in portfolio]
    if not parts:
        raise SicrError("empty-portfolio")
    cols = parts[0].keys()
    frame = pd.DataFrame({c: np.concatenate([p[c] for p in parts]) for c in cols})
    return frame


@dataclass
class LabeledPanel:
    frame: pd.DataFrame
    definition: SicrDefinition
    schema: FeatureSchema

    def __post_init__(self):
        missing = [c for c in (*ID_COLUMNS, *self.schema.names) if c not in self.frame]
        if missing:
            raise SicrError("bad-panel", f"missing columns {missing}")

    def __len__(self):
        return len(self.frame)

    @property
    def y(self) -> np.ndarray:
        return self.frame["y"].to_numpy(dtype=np.int64)

    @property
    def stage1(self) -> np.ndarray:
        return self.frame["stage1"].to_numpy(dtype=bool)

    @property
    def months(self) -> np.ndarray:
        return self.frame["month"].to_numpy(dtype=np.int64)

    @property
    def loan_ids(self) -> np.ndarray:
        return self.frame["loan_id"].to_numpy()

    def take(self, index) -> "LabeledPanel":
        """Rows at positional ``index`` (kept in the given order)."""
        return LabeledPanel(self.frame.iloc[np.asarray(index)].reset_index(drop=True),
                            self.definition, self.schema)

    def strata(self) -> np.ndarray:
        """Integer stratum id per row for (month, y), ordered by month then y."""
        keys = self.months * 2 + self.y
        _, inverse = np.unique(keys, return_inverse=True)
        return inverse


def label_loans(portfolio: Portfolio, definition: SicrDefinition):
    """Per loan: positions with defined outcomes, outcomes and stage-1 flags."""
    out = []
    for loan in portfolio:
        status = compute_status(loan, definition.d, definition.s)
        outcome = label_outcomes(status, definition.k)
        pos = outcome.positions
        current = np.zeros(len(loan), dtype=bool)
        current[status.offset:status.offset + len(status.statuses)] = status.statuses
        stage1 = ~current[pos] & (loan.g0[pos] < DEFAULT_THRESHOLD)
        out.append((pos, outcome.outcomes, stage1))
    return out


def build_panel(portfolio: Portfolio, definition: SicrDefinition,
                schema: FeatureSchema | None = None,
                features: pd.DataFrame | None = None) -> LabeledPanel:
    """Cross-sectional panel with one row per loan-month whose outcome exists.

    ``features`` may carry a precomputed :func:`engineer_features` frame for
    the same portfolio.
    """
    schema = schema or default_schema()
    if len(portfolio) == 0:
        raise SicrError("empty-portfolio")
    if features is None:
        features = engineer_features(portfolio)
    missing = [n for n in schema.names if n not in features]
    if missing:
        raise SicrError("bad-schema", f"features not computable: {missing}")

    labels = label_loans(portfolio, definition)
    starts = np.cumsum([0] + [len(loan) for loan in portfolio])[:-1]
    rows = np.concatenate([start + pos for start, (pos, _, _) in zip(starts, labels)])
    y = np.concatenate([o for _, o, _ in labels]).astype(np.int64)
    stage1 = np.concatenate([s for _, _, s in labels])

    frame = features.iloc[rows][["loan_id", "month", *schema.names]].reset_index(drop=True)
    frame.insert(2, "y", y)
    frame.insert(3, "stage1", stage1)
    return LabeledPanel(frame, definition, schema)


@dataclass
class RateSeries:
    months: np.ndarray
    n: np.ndarray
    events: np.ndarray
    rate: np.ndarray
    kind: str = "A"

    def __post_init__(self):
        self.months = np.asarray(self.months, dtype=np.int64)
        self.n = np.asarray(self.n, dtype=np.int64)
        self.events = np.asarray(self.events, dtype=float)
        self.rate = np.asarray(self.rate, dtype=float)
        if np.any(self.n <= 0):
            raise SicrError("bad-rates", "non-positive at-risk count")
        if np.any(self.rate < 0) or np.any(self.rate > 1):
            raise SicrError("bad-rates", "rate outside [0, 1]")

    def __len__(self):
        return len(self.months)

    def as_dict(self):
        return dict(zip(self.months.tolist(), self.rate.tolist()))


def rates_by_month(months, values, kind) -> RateSeries:
    """Per-month mean of ``values`` (0/1 outcomes or scores)."""
    months = np.asarray(months, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    uniq, inverse = np.unique(months, return_inverse=True)
    n = np.bincount(inverse, minlength=len(uniq))
    events = np.bincount(inverse, weights=values, minlength=len(uniq))
    return RateSeries(uniq, n, events, events / n, kind)


def sicr_rate_series(panel: LabeledPanel) -> RateSeries:
    """Actual SICR-rate: share of stage-1 rows per month with ``y = 1``."""
    if len(panel) == 0:
        raise SicrError("empty-panel")
    mask = panel.stage1
    return rates_by_month(panel.months[mask], panel.y[mask], "A")


def allocate(sizes, target: int) -> np.ndarray:
    """Proportional allocation of ``target`` over strata, largest remainder.

    Every stratum receives ``floor(f * size)`` with ``f = target / sum``;
    the leftover units go to the largest fractional parts, earlier strata
    first on ties.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    total = int(sizes.sum())
    if target > total:
        raise SicrError("target-exceeds-population", f"{target} > {total}")
    if target < 0:
        raise SicrError("bad-target", str(target))
    if total == 0:
        return np.zeros_like(sizes)
    # exact rational arithmetic: quota = sizes * target / total
    num = sizes * target
    base = num // total
    remainder = num - base * total
    short = target - int(base.sum())
    order = np.lexsort((np.arange(len(sizes)), -remainder))
    base[order[:short]] += 1
    return base


def _stratified_pick(strata, counts, rng) -> np.ndarray:
    order = np.argsort(strata, kind="stable")
    bounds = np.searchsorted(strata[order], np.arange(len(counts) + 1))
    picked = []
    for s, c in enumerate(counts):
        members = order[bounds[s]:bounds[s + 1]]
        if c == len(members):
            picked.append(members)
        elif c:
            picked.append(rng.choice(members, size=c, replace=False))
    if not picked:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(picked))


def stratified_subsample(panel: LabeledPanel, target_rows: int, seed) -> LabeledPanel:
    """Fixed-size sample preserving each (month, y) stratum's share."""
    if target_rows > len(panel):
        raise SicrError("target-exceeds-population", f"{target_rows} > {len(panel)}")
    strata = panel.strata()
    counts = allocate(np.bincount(strata), target_rows)
    rng = np.random.default_rng(seed)
    return panel.take(_stratified_pick(strata, counts, rng))


def split(panel: LabeledPanel, train_fraction: float, seed, mode: str = "observation"):
    """Disjoint train/validation partition.

    ``mode="observation"`` stratifies rows by (month, y); ``mode="account"``
    keeps each loan's rows together.
    """
    if not 0.0 < train_fraction < 1.0:
        raise SicrError("bad-fraction", str(train_fraction))
    rng = np.random.default_rng(seed)
    n = len(panel)
    if mode == "observation":
        strata = panel.strata()
        counts = allocate(np.bincount(strata), int(round(train_fraction * n)))
        train_idx = _stratified_pick(strata, counts, rng)
    elif mode == "account":
        ids = np.unique(panel.loan_ids)
        chosen = rng.permutation(ids)[: int(round(train_fraction * len(ids)))]
        train_idx = np.flatnonzero(np.isin(panel.loan_ids, chosen))
    else:
        raise SicrError("bad-split-mode", mode)
    mask = np.zeros(n, dtype=bool)
    mask[train_idx] = True
    return panel.take(np.flatnonzero(mask)), panel.take(np.flatnonzero(~mask))


def series_mae(x: RateSeries, y: RateSeries) -> float:
    """Mean absolute rate difference over the months both series report."""
    common, ix, iy = np.intersect1d(x.months, y.months, return_indices=True)
    if len(common) == 0:
        raise SicrError("no-overlap")
    dropped = len(x) + len(y) - 2 * len(common)
    if dropped:
        log.info("series_mae: %d unmatched months excluded", dropped)
    return float(np.mean(np.abs(x.rate[ix] - y.rate[iy])))


representativeness_mae = series_mae
