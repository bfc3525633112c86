"""Delinquency-based SICR statuses, outcome labelling and definition grids.

Positions in a history are zero-based month offsets from the first observed
month. A status at position ``t`` exists only once ``s`` months are
available (``t >= s - 1``); an outcome at ``t`` exists only when the status
at ``t + k`` exists.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import SicrError

DEFAULT_THRESHOLD = 3

CANONICAL_D = (1, 2)
CANONICAL_S = (1, 2, 3)
CANONICAL_K = (3, 6, 9, 12)
EXTENDED_K = (3, 6, 9, 12, 18, 24, 36)


@dataclass
class LoanHistory:
    loan_id: int | str
    origination_month: int
    term_months: int
    g0: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.g0 = np.asarray(self.g0, dtype=np.int64)
        if self.g0.ndim != 1:
            raise SicrError("bad-history", "g0 must be one-dimensional")
        if self.term_months < 1:
            raise SicrError("bad-history", "term_months must be positive")
        if np.any(self.g0 < 0):
            raise SicrError("bad-history", f"negative g0 for loan {self.loan_id}")
        if len(self.g0) > self.term_months:
            raise SicrError("bad-history", f"loan {self.loan_id} observed beyond term")
        for name, values in self.covariates.items():
            if len(values) != len(self.g0):
                raise SicrError("bad-history", f"covariate {name!r} length mismatch")

    def __len__(self):
        return len(self.g0)

    @property
    def months(self) -> np.ndarray:
        """Calendar month index of every observation."""
        return self.origination_month + np.arange(len(self.g0))


@dataclass(frozen=True)
class SicrDefinition:
    d: int
    s: int
    k: int
    label: str = ""

    def __post_init__(self):
        if self.d < 1 or self.s < 1 or self.k < 0:
            raise SicrError("bad-definition", f"({self.d},{self.s},{self.k})")
        if not self.label:
            object.__setattr__(self, "label", f"d{self.d}s{self.s}k{self.k}")

    @property
    def key(self):
        return (self.d, self.s, self.k)


@dataclass
class SicrStatusSeries:
    loan_id: int | str
    offset: int
    statuses: np.ndarray
    length: int

    def at(self, position):
        """Status at ``position`` or None where undefined."""
        j = position - self.offset
        if 0 <= j < len(self.statuses):
            return bool(self.statuses[j])
        return None


@dataclass
class OutcomeSeries:
    loan_id: int | str
    offset: int
    outcomes: np.ndarray

    def at(self, position):
        j = position - self.offset
        if 0 <= j < len(self.outcomes):
            return bool(self.outcomes[j])
        return None

    @property
    def positions(self) -> np.ndarray:
        return self.offset + np.arange(len(self.outcomes))


def _g0_of(history) -> tuple[object, np.ndarray]:
    if isinstance(history, LoanHistory):
        return history.loan_id, history.g0
    return None, np.asarray(history, dtype=np.int64)


def compute_status(history, d: int, s: int) -> SicrStatusSeries:
    """Evaluate the SICR decision function over a loan's g0 path.

    The status at position ``t`` is 1 iff ``g0 >= d`` in each of the ``s``
    consecutive months ending at ``t``. ``history`` may be a
    :class:`LoanHistory` or a bare g0 sequence.
    """
    if d < 1 or s < 1:
        raise SicrError("bad-definition", f"d={d}, s={s}")
    loan_id, g0 = _g0_of(history)
    n = len(g0)
    if n == 0:
        raise SicrError("empty-series")
    if s > n:
        return SicrStatusSeries(loan_id, s - 1, np.zeros(0, dtype=bool), n)
    hits = np.concatenate(([0], np.cumsum(g0 >= d)))
    # window sum over [t-s+1, t] for t = s-1 .. n-1
    window = hits[s:] - hits[: n - s + 1]
    return SicrStatusSeries(loan_id, s - 1, window == s, n)


def label_outcomes(status: SicrStatusSeries, k: int) -> OutcomeSeries:
    """Shift statuses back by ``k`` months: ``Y_t = G(t + k)``.

    Outcomes whose look-ahead runs past the observed horizon are absent.
    """
    if k < 0:
        raise SicrError("bad-definition", f"k={k}")
    start = max(0, k - status.offset)
    offset = max(0, status.offset - k)
    return OutcomeSeries(status.loan_id, offset, status.statuses[start:].copy())


def is_default(g0_value, threshold: int = DEFAULT_THRESHOLD):
    """Default flag ``g0 >= 3``; works elementwise on arrays."""
    if np.isscalar(g0_value):
        if g0_value < 0:
            raise SicrError("bad-history", "negative g0")
        return bool(g0_value >= threshold)
    return np.asarray(g0_value) >= threshold


_ROMAN = [(1000, "m"), (900, "cm"), (500, "d"), (400, "cd"), (100, "c"), (90, "xc"),
          (50, "l"), (40, "xl"), (10, "x"), (9, "ix"), (5, "v"), (4, "iv"), (1, "i")]


def roman(n: int) -> str:
    out = []
    for value, numeral in _ROMAN:
        count, n = divmod(n, value)
        out.append(numeral * count)
    return "".join(out)


def definition_label(d: int, s: int, k_rank: int) -> str:
    """``1a(i)``-style label: d as digit, s as letter, k rank as roman numeral."""
    if s <= 26:
        letter = chr(ord("a") + s - 1)
    else:
        letter = f"s{s}"
    return f"{d}{letter}({roman(k_rank)})"


def definition_grid(d_values: Iterable[int], s_values: Iterable[int],
                    k_values: Iterable[int]) -> list[SicrDefinition]:
    """Cartesian product of parameter sets, ordered d, then s, then k."""
    ds, ss, ks = (sorted(set(v)) for v in (d_values, s_values, k_values))
    if not ds or not ss or not ks:
        raise SicrError("empty-grid")
    if min(ds) < 1 or min(ss) < 1 or min(ks) < 0:
        raise SicrError("bad-definition", "grid values must be positive")
    rank = {k: i + 1 for i, k in enumerate(ks)}
    return [SicrDefinition(d, s, k, definition_label(d, s, rank[k]))
            for d, s, k in itertools.product(ds, ss, ks)]


def merge_grids(*grids: Iterable[SicrDefinition]) -> list[SicrDefinition]:
    """Union of grids keyed on (d, s, k), sorted like a single grid.

    The first label seen for a triple wins, so the canonical grid should be
    passed first.
    """
    seen: dict[tuple, SicrDefinition] = {}
    for grid in grids:
        for defn in grid:
            seen.setdefault(defn.key, defn)
    return [seen[key] for key in sorted(seen)]


def canonical_grid(extended: bool = True) -> list[SicrDefinition]:
    """The 24-definition grid, optionally plus class 1a at k = 18, 24, 36."""
    grid = definition_grid(CANONICAL_D, CANONICAL_S, CANONICAL_K)
    if extended:
        grid = merge_grids(grid, definition_grid([1], [1], EXTENDED_K))
    return grid


def select_definitions(grid, labels) -> list[SicrDefinition]:
    """Subset of ``grid`` by label, keeping grid order."""
    wanted = set(labels)
    unknown = wanted - {d.label for d in grid}
    if unknown:
        raise SicrError("unknown-definition", ", ".join(sorted(unknown)))
    return [d for d in grid if d.label in wanted]
