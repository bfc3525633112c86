"""File formats: portfolio, macro, panel, rate series, reports, models, attributions.

Rates and metrics are written with six decimals; raw data (portfolio,
macro, panel features) use shortest round-trip float text so that a
file-mediated pipeline sees exactly the in-process values. Months are
``YYYY-MM``. Every writer goes through :func:`atomic_write`.
"""
from __future__ import annotations

import io as _io
import json
import os
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np
import pandas as pd

from .core import LoanHistory, SicrDefinition
from .dataset import FeatureSchema, LabeledPanel, RateSeries
from .errors import SicrError, SchemaMismatchError
from .evaluation import DefinitionReport
from .logit import INTERCEPT, DesignSpec, LogitModel
from .months import format_month, parse_month
from .shapley import AttributionRows, ImportanceRanking
from .synth import MACRO_SERIES, MacroScenario, Portfolio

METRIC_FORMAT = "%.6f"
COVARIATES = ("balance", "interest_margin", "prelim_perc", "pay_method")
PORTFOLIO_COLUMNS = ("loan_id", "month", "g0", "term", "origination_month", *COVARIATES)


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    return path


def _csv_text(frame: pd.DataFrame, float_format=None) -> str:
    buf = _io.StringIO()
    frame.to_csv(buf, index=False, float_format=float_format, lineterminator="\n")
    return buf.getvalue()


def _read_csv(source, **kw) -> pd.DataFrame:
    return pd.read_csv(source, float_precision="round_trip", keep_default_na=False, **kw)


def _months_out(values):
    return [format_month(m) for m in values]


def _months_in(values):
    return np.array([parse_month(m) for m in values], dtype=np.int64)


# -- portfolio / macro ------------------------------------------------------

def portfolio_frame(portfolio: Portfolio) -> pd.DataFrame:
    parts = []
    for loan in portfolio:
        n = len(loan)
        part = {"loan_id": np.full(n, loan.loan_id), "month": loan.months,
                "g0": loan.g0, "term": np.full(n, loan.term_months),
                "origination_month": np.full(n, loan.origination_month)}
        for name in COVARIATES:
            part[name] = loan.covariates[name]
        parts.append(pd.DataFrame(part))
    frame = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(
        columns=PORTFOLIO_COLUMNS)
    frame["month"] = _months_out(frame["month"])
    frame["origination_month"] = _months_out(frame["origination_month"])
    return frame[list(PORTFOLIO_COLUMNS)]


def write_portfolio(portfolio: Portfolio, path):
    atomic_write(path, _csv_text(portfolio_frame(portfolio)))


def read_loans(path) -> list[LoanHistory]:
    frame = _read_csv(_require(path), dtype={"pay_method": str})
    missing = [c for c in PORTFOLIO_COLUMNS if c not in frame]
    if missing:
        raise SchemaMismatchError(f"portfolio file lacks {missing}")
    frame["month"] = _months_in(frame["month"])
    loans = []
    for loan_id, rows in frame.groupby("loan_id", sort=False):
        rows = rows.sort_values("month")
        months = rows["month"].to_numpy()
        orig = parse_month(rows["origination_month"].iloc[0])
        if months[0] != orig or np.any(np.diff(months) != 1):
            raise SicrError("bad-history", f"loan {loan_id}: months not contiguous from origination")
        cov = {name: rows[name].to_numpy() for name in COVARIATES}
        cov["pay_method"] = cov["pay_method"].astype(object)
        cov["balance"] = cov["balance"].astype(float)
        cov["interest_margin"] = cov["interest_margin"].astype(float)
        cov["prelim_perc"] = cov["prelim_perc"].astype(float)
        loans.append(LoanHistory(loan_id.item() if hasattr(loan_id, "item") else loan_id,
                                 orig, int(rows["term"].iloc[0]),
                                 rows["g0"].to_numpy(dtype=np.int64), cov))
    return loans


def write_macro(macro: MacroScenario, path):
    frame = pd.DataFrame({"month": _months_out(macro.months), "regime": macro.regime})
    for name in MACRO_SERIES:
        frame[name] = macro.series[name]
    atomic_write(path, _csv_text(frame))


def read_macro(path) -> MacroScenario:
    frame = _read_csv(_require(path), dtype={"regime": str})
    missing = [c for c in ("month", "regime", *MACRO_SERIES) if c not in frame]
    if missing:
        raise SchemaMismatchError(f"macro file lacks {missing}")
    series = {name: frame[name].to_numpy(dtype=float) for name in MACRO_SERIES}
    return MacroScenario(_months_in(frame["month"]), series,
                         frame["regime"].to_numpy(dtype=object))


def write_simulation(portfolio: Portfolio, directory):
    directory = Path(directory)
    write_portfolio(portfolio, directory / "portfolio.csv")
    write_macro(portfolio.macro, directory / "macro.csv")


def read_simulation(directory) -> Portfolio:
    directory = Path(directory)
    return Portfolio(read_loans(directory / "portfolio.csv"),
                     read_macro(directory / "macro.csv"))


# -- panels -----------------------------------------------------------------

def _panel_header(panel: LabeledPanel) -> str:
    d = panel.definition
    lines = ["# sicr-panel v1",
             f"# definition: {json.dumps({'label': d.label, 'd': d.d, 's': d.s, 'k': d.k})}",
             f"# schema_hash: {panel.schema.hash()}"]
    for rec in panel.schema.to_records():
        lines.append(f"# feature: {json.dumps(rec)}")
    return "\n".join(lines) + "\n"


def panel_text(panel: LabeledPanel) -> str:
    frame = panel.frame[["loan_id", "month", "y", "stage1", *panel.schema.names]].copy()
    frame["month"] = _months_out(frame["month"])
    frame["stage1"] = frame["stage1"].astype(int)
    return _panel_header(panel) + _csv_text(frame)


def write_panel(panel: LabeledPanel, path):
    atomic_write(path, panel_text(panel))


def read_panel(path) -> LabeledPanel:
    text = _require(path).read_text()
    header, body = [], []
    for line in text.splitlines(keepends=True):
        (header if line.startswith("#") and not body else body).append(line)
    if not header or header[0].strip() != "# sicr-panel v1":
        raise SchemaMismatchError(f"{path}: not a panel file")
    definition = schema_hash = None
    records = []
    for line in header[1:]:
        key, _, value = line[2:].partition(": ")
        if key == "definition":
            spec = json.loads(value)
            definition = SicrDefinition(spec["d"], spec["s"], spec["k"], spec["label"])
        elif key == "schema_hash":
            schema_hash = value.strip()
        elif key == "feature":
            records.append(json.loads(value))
    schema = FeatureSchema.from_records(records)
    if schema.hash() != schema_hash:
        raise SchemaMismatchError(f"{path}: schema hash does not match feature block")
    cats = {f.name: str for f in schema.features if f.kind == "categorical"}
    frame = _read_csv(_io.StringIO("".join(body)), dtype=cats)
    expected = ["loan_id", "month", "y", "stage1", *schema.names]
    if list(frame.columns) != expected:
        raise SchemaMismatchError(f"{path}: columns differ from schema")
    frame["month"] = _months_in(frame["month"])
    frame["y"] = frame["y"].astype(np.int64)
    frame["stage1"] = frame["stage1"].astype(bool)
    for f in schema.features:
        frame[f.name] = frame[f.name].astype(object if f.kind == "categorical" else float)
    return LabeledPanel(frame, definition, schema)


# -- rate series --------------------------------------------------------------

RATE_COLUMNS = ("month", "kind", "n", "events", "rate")


def rates_text(series) -> str:
    frames = [pd.DataFrame({"month": _months_out(s.months), "kind": s.kind, "n": s.n,
                            "events": s.events, "rate": s.rate}) for s in series]
    return _csv_text(pd.concat(frames, ignore_index=True), METRIC_FORMAT)


def write_rates(series, path):
    atomic_write(path, rates_text(series))


def read_rates(path) -> list[RateSeries]:
    frame = _read_csv(_require(path), dtype={"kind": str})
    if list(frame.columns) != list(RATE_COLUMNS):
        raise SchemaMismatchError(f"{path}: unexpected rate-series columns")
    out = []
    for kind, rows in frame.groupby("kind", sort=False):
        out.append(RateSeries(_months_in(rows["month"]), rows["n"].to_numpy(),
                              rows["events"].to_numpy(float), rows["rate"].to_numpy(float),
                              kind))
    return out


def plot_frame(series_by_label: dict) -> pd.DataFrame:
    """Tidy long format (month, series, value) for line charts."""
    rows = []
    for label, series in series_by_label.items():
        for s in series:
            rows.append(pd.DataFrame({"month": _months_out(s.months),
                                      "series": f"{label}:{s.kind}", "value": s.rate}))
    return pd.concat(rows, ignore_index=True)


def plot_text(frame: pd.DataFrame) -> str:
    return _csv_text(frame[["month", "series", "value"]], METRIC_FORMAT)


def write_plot_data(series_by_label: dict, path):
    atomic_write(path, plot_text(plot_frame(series_by_label)))


def read_plot_data(path) -> pd.DataFrame:
    frame = _read_csv(_require(path), dtype={"series": str, "month": str})
    if list(frame.columns) != ["month", "series", "value"]:
        raise SchemaMismatchError(f"{path}: unexpected plot-data columns")
    return frame


# -- grid summary ---------------------------------------------------------------

SUMMARY_COLUMNS = ("label", "d", "s", "k", "prevalence", "auc", "auc_discrete", "mae_m1",
                   "mae_m2", "rank_auc", "rank_m1", "rank_m2")


def summary_frame(reports) -> pd.DataFrame:
    """Headline metrics per definition with ranks (1 = best)."""
    frame = pd.DataFrame([{c: getattr(r, c) for c in SUMMARY_COLUMNS[:9]} for r in reports])
    frame["rank_auc"] = frame["auc"].rank(ascending=False, method="min").astype(int)
    frame["rank_m1"] = frame["mae_m1"].rank(method="min").astype(int)
    frame["rank_m2"] = frame["mae_m2"].rank(method="min").astype(int)
    return frame


def summary_text(frame: pd.DataFrame) -> str:
    return _csv_text(frame[list(SUMMARY_COLUMNS)], METRIC_FORMAT)


def write_summary(reports, path):
    atomic_write(path, summary_text(summary_frame(reports)))


def read_summary(path) -> pd.DataFrame:
    frame = _read_csv(_require(path), dtype={"label": str})
    if list(frame.columns) != list(SUMMARY_COLUMNS):
        raise SchemaMismatchError(f"{path}: unexpected summary columns")
    return frame


# -- reports ------------------------------------------------------------------

REPORT_COLUMNS = tuple(f.name for f in fields(DefinitionReport))
_INT_FIELDS = {f.name for f in fields(DefinitionReport) if f.type in ("int", int)}


def report_text(reports) -> str:
    frame = pd.DataFrame([r.as_dict() for r in reports], columns=list(REPORT_COLUMNS))
    return _csv_text(frame, METRIC_FORMAT)


def write_report(reports, path):
    atomic_write(path, report_text(reports))


def read_report(path) -> list[DefinitionReport]:
    frame = _read_csv(_require(path), dtype={"label": str})
    if list(frame.columns) != list(REPORT_COLUMNS):
        raise SchemaMismatchError(f"{path}: unexpected report columns")
    out = []
    for rec in frame.to_dict("records"):
        vals = {k: (int(v) if k in _INT_FIELDS else v if k == "label" else float(v))
                for k, v in rec.items()}
        out.append(DefinitionReport(**vals))
    return out


# -- models -------------------------------------------------------------------

def model_text(model: LogitModel) -> str:
    """Flat ``name = value`` text; floats in shortest round-trip form."""
    if model.design is None:
        raise SicrError("bad-model", "model has no design spec")
    lines = ["# sicr logit model v1",
             f"schema_hash = {model.schema_hash}",
             f"schema = {json.dumps(model.design.schema.to_records(), separators=(',', ':'))}",
             f"converged = {str(model.converged).lower()}",
             f"iterations = {model.iterations}",
             f"log_likelihood = {model.log_likelihood!r}",
             f"ridge = {model.ridge!r}",
             f"n_obs = {model.n_obs}"]
    for name, level in sorted(model.design.reference.items()):
        lines.append(f"reference.{name} = {level}")
    names = (INTERCEPT, *model.columns)
    for name, value in zip(names, model.params):
        lines.append(f"coef.{name} = {float(value)!r}")
    if model.covariance is not None:
        for i, row in enumerate(model.covariance):
            lines.append(f"cov.{i} = " + " ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_model(model: LogitModel, path):
    atomic_write(path, model_text(model))


def read_model(path) -> LogitModel:
    entries = {}
    coefs = []
    cov_rows = {}
    reference = {}
    for line in _require(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise SchemaMismatchError(f"{path}: malformed line {line!r}")
        if key.startswith("coef."):
            coefs.append((key[5:], float(value)))
        elif key.startswith("cov."):
            cov_rows[int(key[4:])] = [float(v) for v in value.split()]
        elif key.startswith("reference."):
            reference[key[10:]] = value
        else:
            entries[key] = value
    schema = FeatureSchema.from_records(json.loads(entries["schema"]))
    if schema.hash() != entries["schema_hash"]:
        raise SchemaMismatchError(f"{path}: schema hash does not match schema")
    design = DesignSpec(schema, reference)
    if coefs[0][0] != INTERCEPT or [c for c, _ in coefs[1:]] != design.columns:
        raise SchemaMismatchError(f"{path}: coefficient names differ from design")
    cov = se = None
    if cov_rows:
        cov = np.array([cov_rows[i] for i in range(len(cov_rows))])
        se = np.sqrt(np.diag(cov))
    return LogitModel(coefs[0][1], np.array([v for _, v in coefs[1:]]),
                      tuple(design.columns), float(entries["log_likelihood"]),
                      int(entries["iterations"]), entries["converged"] == "true",
                      se, design, float(entries["ridge"]), int(entries["n_obs"]), cov)


# -- attributions -------------------------------------------------------------

def attribution_text(rows: AttributionRows) -> str:
    frame = pd.DataFrame(rows.values, columns=list(rows.features))
    frame.insert(0, "month", _months_out(rows.months))
    frame.insert(0, "loan_id", rows.loan_ids)
    return _csv_text(frame)


def write_attributions(rows: AttributionRows, path):
    atomic_write(path, attribution_text(rows))


def read_attributions(path) -> AttributionRows:
    frame = _read_csv(_require(path))
    features = tuple(frame.columns[2:])
    return AttributionRows(frame["loan_id"].to_numpy(), _months_in(frame["month"]),
                           features, frame[list(features)].to_numpy(float))


def ranking_text(ranking: ImportanceRanking) -> str:
    frame = pd.DataFrame({"feature": ranking.features, "psi_bar": ranking.values,
                          "rank": np.arange(1, len(ranking.features) + 1)})
    return _csv_text(frame, METRIC_FORMAT)


def write_ranking(ranking: ImportanceRanking, path):
    atomic_write(path, ranking_text(ranking))


def read_ranking(path) -> ImportanceRanking:
    frame = _read_csv(_require(path), dtype={"feature": str})
    frame = frame.sort_values("rank")
    return ImportanceRanking(tuple(frame["feature"]), frame["psi_bar"].to_numpy(float),
                             0)
