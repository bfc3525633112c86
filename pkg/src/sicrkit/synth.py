"""Synthetic macro scenarios and mortgage-like delinquency panels.

The real portfolio behind the SICR study is confidential, so this module
provides a stand-in: a regime-switching macro path (normal / crisis /
recovery) and a per-loan bounded integer chain on the g0 scale whose
worsen/cure probabilities respond to loan covariates and the macro state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, asdict
from typing import Sequence

import numpy as np

from .core import LoanHistory, DEFAULT_THRESHOLD
from .errors import SicrError
from .months import parse_month

MACRO_SERIES = ("repo_rate", "inflation_growth", "dti_level",
                "real_income_growth", "employment_growth")

REGIMES = ("normal", "crisis", "recovery")

PAY_METHODS = ("debit_order", "payroll", "cash", "other")

MACRO_LAG = 12


@dataclass
class SimConfig:
    """Simulation settings; every field has a default usable as-is."""

    n_loans: int = 3000
    window_start: int = parse_month("2006-01")
    window_end: int = parse_month("2016-12")
    # empty when crisis_start > crisis_end
    crisis_start: int = parse_month("2008-07")
    crisis_end: int = parse_month("2010-06")
    recovery_months: int = 12
    seed: int = 1

    # macro: long-run level, crisis shift, AR(1) persistence and noise
    macro_ar: float = 0.85
    repo_rate_mean: float = 7.0
    repo_rate_shift: float = 3.0
    repo_rate_noise: float = 0.15
    inflation_growth_mean: float = 5.0
    inflation_growth_shift: float = 2.5
    inflation_growth_noise: float = 0.3
    dti_level_mean: float = 72.0
    dti_level_shift: float = 8.0
    dti_level_noise: float = 0.5
    real_income_growth_mean: float = 2.5
    real_income_growth_shift: float = -4.0
    real_income_growth_noise: float = 0.4
    employment_growth_mean: float = 1.5
    employment_growth_shift: float = -3.5
    employment_growth_noise: float = 0.3

    # portfolio composition
    initial_book_fraction: float = 0.4
    min_observation_months: int = 6

    # worsen (g0 + 1) log-odds
    worsen_intercept: float = -4.0
    worsen_in_arrears: float = 1.0
    worsen_per_arrears_level: float = -1.3
    worsen_margin: float = 0.25
    worsen_prelim: float = -3.0
    worsen_cash: float = 0.6
    worsen_recent_arrears: float = 0.6
    recent_window: int = 6
    worsen_repo: float = 0.30
    worsen_dti: float = 0.20
    worsen_income: float = -0.20
    worsen_employment: float = -0.20
    worsen_inflation: float = 0.10
    worsen_frailty_sd: float = 0.6

    # cure (g0 - 1) log-odds, only when in arrears and not in default
    cure_intercept: float = 1.0
    cure_prelim: float = 2.0
    cure_repo: float = -0.15
    cure_income: float = 0.10

    # default spells
    default_exit_probability: float = 0.5
    cure_after_default_probability: float = 0.3
    max_g0: int = 12
    prepayment_probability: float = 0.003

    def __post_init__(self):
        self.validate()

    @property
    def model_start(self) -> int:
        """First month with a full 12-month macro lag history."""
        return self.window_start + MACRO_LAG

    @property
    def has_crisis(self) -> bool:
        return self.crisis_start <= self.crisis_end

    def validate(self):
        if self.n_loans < 0:
            raise SicrError("bad-config", "n_loans must be non-negative")
        if self.window_end - self.window_start + 1 < MACRO_LAG + 1:
            raise SicrError("window-too-short")
        if self.has_crisis and not (self.window_start <= self.crisis_start
                                    and self.crisis_end <= self.window_end):
            raise SicrError("bad-config", "crisis window outside simulation window")
        for name in ("initial_book_fraction", "default_exit_probability",
                     "cure_after_default_probability", "prepayment_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SicrError("bad-config", f"{name} must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class MacroScenario:
    months: np.ndarray
    series: dict
    regime: np.ndarray

    def __post_init__(self):
        self.months = np.asarray(self.months, dtype=np.int64)
        if len(self.months) and np.any(np.diff(self.months) != 1):
            raise SicrError("bad-macro", "months must be contiguous")
        for name in MACRO_SERIES:
            if len(self.series[name]) != len(self.months):
                raise SicrError("bad-macro", f"{name} length mismatch")

    def index_of(self, month):
        return np.asarray(month) - self.months[0]

    def value(self, name, month, lag=0):
        """Series value at ``month - lag``; vectorised over ``month``."""
        idx = self.index_of(month) - lag
        if np.any(idx < 0) or np.any(idx >= len(self.months)):
            raise SicrError("macro-out-of-range", f"{name} lag {lag}")
        return np.asarray(self.series[name])[idx]

    def regime_of(self, month):
        return self.regime[self.index_of(month)]


def _regimes(config: SimConfig, months: np.ndarray) -> np.ndarray:
    regime = np.full(len(months), "normal", dtype=object)
    if config.has_crisis:
        crisis = (months >= config.crisis_start) & (months <= config.crisis_end)
        recovery = (months > config.crisis_end) & (
            months <= config.crisis_end + config.recovery_months)
        regime[crisis] = "crisis"
        regime[recovery] = "recovery"
    return regime


def gen_macro(config: SimConfig) -> MacroScenario:
    """Mean-shifted AR(1) macro paths over the simulation window."""
    config.validate()
    months = np.arange(config.window_start, config.window_end + 1)
    regime = _regimes(config, months)
    weight = np.where(regime == "crisis", 1.0, np.where(regime == "recovery", 0.5, 0.0))
    rng = np.random.default_rng([config.seed, 0])
    series = {}
    for name in MACRO_SERIES:
        mean = getattr(config, f"{name}_mean")
        shift = getattr(config, f"{name}_shift")
        noise = getattr(config, f"{name}_noise")
        target = mean + shift * weight
        shocks = rng.normal(0.0, noise, size=len(months))
        level = np.empty(len(months))
        prev = target[0]
        for i in range(len(months)):
            # partial adjustment toward the regime mean keeps paths smooth
            prev = target[i] + config.macro_ar * (prev - target[i - 1] if i else 0.0) + shocks[i]
            level[i] = prev
        series[name] = level
    return MacroScenario(months, series, regime)


def _macro_scores(config: SimConfig, macro: MacroScenario):
    """Standardised macro deviations (units of the crisis shift)."""
    z = {}
    for name in MACRO_SERIES:
        mean = getattr(config, f"{name}_mean")
        shift = abs(getattr(config, f"{name}_shift")) or 1.0
        z[name] = (np.asarray(macro.series[name]) - mean) / shift
    w = (config.worsen_repo * z["repo_rate"] + config.worsen_dti * z["dti_level"]
         + config.worsen_income * z["real_income_growth"]
         + config.worsen_employment * z["employment_growth"]
         + config.worsen_inflation * z["inflation_growth"])
    c = config.cure_repo * z["repo_rate"] + config.cure_income * z["real_income_growth"]
    return w, c


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _origination_months(config: SimConfig, rng) -> np.ndarray:
    start = config.model_start
    last = max(start, config.window_end - config.min_observation_months + 1)
    n = config.n_loans
    book = rng.random(n) < config.initial_book_fraction
    later = rng.integers(start, last + 1, size=n)
    return np.where(book, start, later)


def _simulate_loan(loan_id, orig, config: SimConfig, macro: MacroScenario,
                   macro_w, macro_c) -> LoanHistory:
    rng = np.random.default_rng([config.seed, 1, loan_id])
    term = int(rng.choice([240, 180, 300, 360], p=[0.7, 0.15, 0.1, 0.05]))
    margin = float(rng.normal(0.0, 1.0))
    pay_method = PAY_METHODS[int(rng.choice(4, p=[0.7, 0.12, 0.12, 0.06]))]
    principal = float(rng.lognormal(math.log(800_000.0), 0.5))
    prelim = float(min(rng.beta(0.6, 8.0), 1.0))
    frailty = float(rng.normal(0.0, config.worsen_frailty_sd))
    monthly_rate = (10.0 + margin) / 1200.0
    annuity = principal * monthly_rate / (1.0 - (1.0 + monthly_rate) ** -term)

    horizon = min(term, config.window_end - orig + 1)
    u = rng.random((horizon, 3))
    static = (config.worsen_intercept + frailty + config.worsen_margin * margin
              + (config.worsen_cash if pay_method == "cash" else 0.0))

    g0 = np.zeros(horizon, dtype=np.int64)
    balance = np.zeros(horizon)
    prelim_path = np.zeros(horizon)
    recent = []  # g0 > 0 flags, one per elapsed month
    g, bal, n_obs = 0, principal, horizon
    base = orig - macro.months[0]
    for i in range(horizon):
        if i > 0:
            mw, mc = macro_w[base + i], macro_c[base + i]
            if g >= DEFAULT_THRESHOLD:
                # in default: the spell may end (cure or termination) or deepen
                if u[i, 0] < config.default_exit_probability:
                    if u[i, 1] < config.cure_after_default_probability:
                        g = 0
                    else:
                        n_obs = i
                        break
                elif u[i, 1] < 0.5:
                    g = min(g + 1, config.max_g0)
            else:
                if g == 0 and u[i, 2] < config.prepayment_probability:
                    n_obs = i
                    break
                score = static + mw + config.worsen_prelim * prelim + \
                    config.worsen_recent_arrears * sum(recent[-config.recent_window:])
                if g > 0:
                    score += config.worsen_in_arrears + config.worsen_per_arrears_level * g
                if u[i, 0] < _sigmoid(score):
                    g += 1
                elif g > 0:
                    cure = config.cure_intercept + config.cure_prelim * prelim + mc
                    if u[i, 1] < _sigmoid(cure):
                        g -= 1
            # performing loans prepay a little, distressed ones draw down
            if g == 0:
                prelim = min(1.0, prelim + 0.002 * (1.0 + u[i, 2]))
            else:
                prelim = max(0.0, prelim * 0.7)
            paid = annuity if g == 0 else 0.0
            bal = max(0.0, bal * (1.0 + monthly_rate) - paid)
        recent.append(1 if g > 0 else 0)
        g0[i] = g
        balance[i] = round(bal, 2)
        prelim_path[i] = round(prelim, 6)

    covariates = {
        "balance": balance[:n_obs],
        "interest_margin": np.full(n_obs, round(margin, 6)),
        "prelim_perc": prelim_path[:n_obs],
        "pay_method": np.array([pay_method] * n_obs, dtype=object),
    }
    return LoanHistory(loan_id, int(orig), term, g0[:n_obs], covariates)


@dataclass
class Portfolio:
    loans: list
    macro: MacroScenario
    config: SimConfig | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.loans)

    def __iter__(self):
        return iter(self.loans)


def gen_portfolio(config: SimConfig, macro: MacroScenario) -> Portfolio:
    """Simulate ``config.n_loans`` loan histories against ``macro``.

    Loan ``i`` draws from its own stream seeded by ``(seed, 1, i)``, so the
    output does not depend on generation order.
    """
    config.validate()
    rng = np.random.default_rng([config.seed, 2])
    origination = _origination_months(config, rng)
    macro_w, macro_c = _macro_scores(config, macro)
    loans = []
    for loan_id in range(config.n_loans):
        loan = _simulate_loan(loan_id, int(origination[loan_id]), config, macro,
                              macro_w, macro_c)
        if len(loan):
            loans.append(loan)
    return Portfolio(loans, macro, config)


def simulate(config: SimConfig) -> Portfolio:
    return gen_portfolio(config, gen_macro(config))


def delinquency_fraction(portfolio: Portfolio, months: Sequence[int] | None = None):
    """Per-month share of observed loans with g0 >= 1, keyed by month."""
    counts: dict[int, list] = {}
    for loan in portfolio:
        for month, g in zip(loan.months, loan.g0):
            c = counts.setdefault(int(month), [0, 0])
            c[0] += g >= 1
            c[1] += 1
    keys = sorted(counts) if months is None else [m for m in months if m in counts]
    return {m: counts[m][0] / counts[m][1] for m in keys}
