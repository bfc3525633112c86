"""Binary logistic regression fitted by iteratively reweighted least squares."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dataset import FeatureSchema, LabeledPanel
from .errors import SicrError, SchemaMismatchError

INTERCEPT = "(Intercept)"

GRAD_TOL = 1e-8
LLF_TOL = 1e-10
MAX_ITER = 100
DEFAULT_RIDGE = 1e-6
MAX_HALVINGS = 30


class SeparationWarning(UserWarning):
    pass


def sigmoid(w):
    """Logistic function without overflow for large ``|w|``."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    pos = w >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-w[pos]))
    e = np.exp(w[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class DesignSpec:
    """How schema features expand into design-matrix columns.

    Categorical features are one-hot encoded against a reference level that
    is dropped; ``reference`` maps feature name to that level.
    """

    schema: FeatureSchema
    reference: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        cols = []
        for f in self.schema.features:
            if f.kind == "numeric":
                cols.append(f.name)
            else:
                ref = self.reference[f.name]
                cols.extend(f"{f.name}[{lvl}]" for lvl in f.levels if lvl != ref)
        return cols

    @classmethod
    def from_training(cls, panel: LabeledPanel) -> "DesignSpec":
        """Reference level = most frequent training level (first in level order on ties)."""
        reference = {}
        for f in panel.schema.features:
            if f.kind != "categorical":
                continue
            counts = panel.frame[f.name].value_counts()
            best = max(f.levels, key=lambda lvl: (counts.get(lvl, 0), -f.levels.index(lvl)))
            reference[f.name] = best
        return cls(panel.schema, reference)

    def matrix(self, frame) -> np.ndarray:
        blocks = []
        for f in self.schema.features:
            col = frame[f.name]
            if f.kind == "numeric":
                blocks.append(np.asarray(col, dtype=float)[:, None])
                continue
            values = np.asarray(col, dtype=object)
            unknown = set(np.unique(values.astype(str))) - set(f.levels)
            if unknown:
                raise SchemaMismatchError(f"{f.name}: unknown levels {sorted(unknown)}")
            ref = self.reference[f.name]
            levels = [lvl for lvl in f.levels if lvl != ref]
            blocks.append(np.column_stack([values == lvl for lvl in levels]).astype(float)
                          if levels else np.zeros((len(values), 0)))
        if not blocks:
            return np.zeros((len(frame), 0))
        X = np.hstack(blocks)
        if not np.all(np.isfinite(X)):
            raise SicrError("non-finite-input")
        return X


@dataclass(frozen=True)
class LogitModel:
    intercept: float
    coefficients: np.ndarray
    columns: tuple
    log_likelihood: float
    iterations: int
    converged: bool
    # intercept first, aligned with params
    standard_errors: np.ndarray | None = None
    design: DesignSpec | None = None
    ridge: float = 0.0
    n_obs: int = 0
    # inverse observed information on the original scale, intercept first
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def schema_hash(self) -> str | None:
        return self.design.schema.hash() if self.design else None

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(([self.intercept], self.coefficients))

    def linear_predictor(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.coefficients):
            raise SchemaMismatchError(
                f"expected {len(self.coefficients)} columns, got {X.shape[1]}")
        return self.intercept + X @ self.coefficients

    def design_matrix(self, panel: LabeledPanel) -> np.ndarray:
        if self.design is None:
            raise SchemaMismatchError("model carries no design spec")
        if panel.schema.hash() != self.design.schema.hash():
            raise SchemaMismatchError("panel schema differs from model schema")
        return self.design.matrix(panel.frame)


# float64 rounds sigmoid(w) to exactly 1 for w > ~37; scores stay strictly inside (0, 1)
_P_LOW = np.finfo(float).tiny
_P_HIGH = np.nextafter(1.0, 0.0)


def _scores(eta):
    return np.clip(sigmoid(eta), _P_LOW, _P_HIGH)


def predict(model: LogitModel, features) -> np.ndarray | float:
    """Probability scores for a feature vector or a design matrix."""
    arr = np.asarray(features, dtype=float)
    p = _scores(model.linear_predictor(arr))
    return float(p[0]) if arr.ndim == 1 else p


def predict_panel(model: LogitModel, panel: LabeledPanel) -> np.ndarray:
    return _scores(model.linear_predictor(model.design_matrix(panel)))


def penalised_loglik(beta, X1, y, ridge):
    """Log-likelihood minus ``ridge/2 * ||beta[1:]||^2`` for an intercept-first design."""
    w = X1 @ beta
    ll = float(np.sum(y * w - np.logaddexp(0.0, w)))
    return ll - 0.5 * ridge * float(beta[1:] @ beta[1:])


def penalised_gradient(beta, X1, y, ridge):
    g = X1.T @ (y - sigmoid(X1 @ beta))
    g[1:] -= ridge * beta[1:]
    return g


def _hessian(beta, X1, ridge):
    p = sigmoid(X1 @ beta)
    W = p * (1.0 - p)
    H = (X1 * W[:, None]).T @ X1
    H[np.diag_indices_from(H)] += np.r_[0.0, np.full(len(beta) - 1, ridge)]
    return H


@dataclass
class FitTrace:
    loglik: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)


def _standardise(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def fit_arrays(X, y, ridge=DEFAULT_RIDGE, grad_tol=GRAD_TOL, llf_tol=LLF_TOL,
               max_iter=MAX_ITER, columns=None, design=None, trace=None) -> LogitModel:
    """Maximise the ridge-penalised log-likelihood by IRLS with step halving.

    Columns are centred and scaled internally; the penalty acts on the
    standardised coefficients and the intercept is never penalised. The
    returned coefficients are on the original scale.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if len(y) != len(X):
        raise SicrError("bad-input", "X and y lengths differ")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise SicrError("non-finite-input")
    if ridge < 0:
        raise SicrError("bad-input", "ridge must be non-negative")
    n_pos = float(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise SicrError("degenerate-outcome")

    mean, scale = _standardise(X)
    Z = np.column_stack([np.ones(len(X)), (X - mean) / scale])
    beta = np.zeros(Z.shape[1])
    beta[0] = math.log(n_pos / (len(y) - n_pos))
    ll = penalised_loglik(beta, Z, y, ridge)
    if trace is not None:
        trace.loglik.append(ll)

    converged = separated = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = penalised_gradient(beta, Z, y, ridge)
        H = _hessian(beta, Z, ridge)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            ll_new = penalised_loglik(cand, Z, y, ridge)
            if ll_new >= ll:
                break
            t *= 0.5
        else:
            cand, ll_new = beta, ll
        beta, ll_old, ll = cand, ll, ll_new
        if trace is not None:
            trace.loglik.append(ll)
            trace.step_sizes.append(t)

        p = sigmoid(Z @ beta)
        if ridge == 0 and np.all(np.abs(y - p) < 1e-6):
            separated = True
            break
        grad = penalised_gradient(beta, Z, y, ridge)
        if np.max(np.abs(grad)) < grad_tol or abs(ll - ll_old) <= llf_tol * abs(ll_old):
            converged = True
            break

    if separated or not converged:
        warnings.warn("logistic fit did not converge (possible separation)"
                      if not separated else "perfect separation detected; MLE does not exist",
                      SeparationWarning, stacklevel=2)
        converged = False

    # back-transform: w = b0 + sum b_j (x_j - m_j) / s_j
    coef = beta[1:] / scale
    intercept = beta[0] - float(coef @ mean)
    T = np.eye(len(beta))
    T[1:, 1:] = np.diag(1.0 / scale)
    T[0, 1:] = -mean / scale
    cov = se = None
    try:
        H = _hessian(beta, Z, ridge)
        cov_std = np.linalg.inv(H)
        if (np.linalg.cond(H) < 1e13 and np.all(np.isfinite(cov_std))
                and np.all(np.diag(cov_std) > 0)):
            cov = T @ cov_std @ T.T
            se = np.sqrt(np.diag(cov))
    except np.linalg.LinAlgError:
        pass

    loglik = float(np.sum(y * (Z @ beta) - np.logaddexp(0.0, Z @ beta)))
    cols = tuple(columns) if columns is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    return LogitModel(intercept, coef, cols, loglik, it, converged, se, design,
                      ridge, len(y), cov)


def fit(panel: LabeledPanel, ridge=DEFAULT_RIDGE, **options) -> LogitModel:
    """Fit on every row of ``panel`` using its schema."""
    design = DesignSpec.from_training(panel)
    X = design.matrix(panel.frame)
    return fit_arrays(X, panel.y, ridge=ridge, columns=design.columns, design=design,
                      **options)


@dataclass(frozen=True)
class WaldRow:
    name: str
    estimate: float
    std_error: float
    z: float
    p_value: float


def wald_inference(model: LogitModel) -> list[WaldRow]:
    """Wald z-tests from the inverse observed information at the optimum."""
    if model.covariance is None:
        raise SicrError("singular-information")
    cov = model.covariance
    names = (INTERCEPT, *model.columns)
    rows = []
    for name, est, var in zip(names, model.params, np.diag(cov)):
        se = math.sqrt(var)
        z = est / se
        rows.append(WaldRow(name, float(est), se, z, float(2.0 * stats.norm.sf(abs(z)))))
    return rows
