"""Shapley attributions for fitted logit models on the linear-predictor scale."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledPanel
from .errors import SicrError, SchemaMismatchError
from .logit import LogitModel, sigmoid


@dataclass
class AttributionRows:
    loan_ids: np.ndarray
    months: np.ndarray
    features: tuple
    values: np.ndarray
    # Monte Carlo standard error per cell; None for exact attributions
    std_errors: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.loan_ids), len(self.features)):
            raise SicrError("bad-attributions", "shape does not match rows x features")

    def __len__(self):
        return len(self.loan_ids)


def _design(model: LogitModel, panel_or_X):
    if isinstance(panel_or_X, LabeledPanel):
        X = model.design_matrix(panel_or_X)
        return X, panel_or_X.loan_ids, panel_or_X.months
    X = np.atleast_2d(np.asarray(panel_or_X, dtype=float))
    idx = np.arange(len(X))
    return X, idx, idx


def exact_linear_shapley(model: LogitModel, panel) -> AttributionRows:
    """``S_ij = beta_j x_ij - mean_i(beta_j x_ij)`` for every row and design column."""
    X, ids, months = _design(model, panel)
    if len(X) == 0:
        raise SicrError("empty-panel")
    if X.shape[1] != len(model.coefficients):
        raise SchemaMismatchError("design width differs from coefficient count")
    contrib = X * model.coefficients
    return AttributionRows(ids, months, tuple(model.columns), contrib - contrib.mean(axis=0))


def mc_shapley(model: LogitModel, panel, n_samples: int, seed, background=None,
               value_fn=None) -> AttributionRows:
    """Permutation-sampling Shapley estimates.

    For each explained row and feature ``j``, every sample draws a random
    feature order and a random background row ``z``; the instance ``x``
    supplies the features preceding ``j``, ``z`` the rest, and the
    estimate averages ``f(with x_j) - f(with z_j)``. ``f`` defaults to the
    model's linear predictor; ``background`` defaults to the explained rows.
    Row ``i`` uses the stream ``(seed, i)``.
    """
    if n_samples < 1:
        raise SicrError("bad-input", "n_samples must be >= 1")
    X, ids, months = _design(model, panel)
    if background is None:
        B = X
    else:
        B = _design(model, background)[0]
    if len(B) == 0:
        raise SicrError("empty-background")
    f = value_fn or model.linear_predictor
    n, p = X.shape
    values = np.zeros((n, p))
    errors = np.zeros((n, p))
    cols = np.arange(p)
    for i in range(n):
        rng = np.random.default_rng([int(seed), i])
        for j in range(p):
            perms = rng.permuted(np.tile(cols, (n_samples, 1)), axis=1)
            z = B[rng.integers(0, len(B), size=n_samples)]
            # features ranked before j in each permutation come from x
            ranks = np.argsort(perms, axis=1)
            from_x = ranks < ranks[:, [j]]
            without = np.where(from_x, X[i], z)
            with_j = without.copy()
            with_j[:, j] = X[i, j]
            diff = f(with_j) - f(without)
            values[i, j] = diff.mean()
            errors[i, j] = diff.std(ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.nan
    return AttributionRows(ids, months, tuple(model.columns), values, errors)


@dataclass
class ImportanceRanking:
    features: tuple
    values: np.ndarray
    n_rows: int

    def rank_of(self, name) -> int:
        return self.features.index(name) + 1


def importance_ranking(attributions: AttributionRows) -> ImportanceRanking:
    """Mean absolute attribution per feature, descending; ties by name."""
    if len(attributions) == 0:
        raise SicrError("empty-attributions")
    psi = np.abs(attributions.values).mean(axis=0)
    order = sorted(range(len(psi)), key=lambda j: (-psi[j], attributions.features[j]))
    return ImportanceRanking(tuple(attributions.features[j] for j in order),
                             psi[order], len(attributions))


def probability_scale_report(model: LogitModel, panel, attributions: AttributionRows):
    """APPROXIMATE probability-scale view: ``sigma(eta) - sigma(eta - S_ij)``.

    Not additive and not a Shapley value on the probability scale; offered
    only to read logit-scale attributions in probability units.
    """
    X, _, _ = _design(model, panel)
    eta = model.linear_predictor(X)
    return sigmoid(eta)[:, None] - sigmoid(eta[:, None] - attributions.values)
