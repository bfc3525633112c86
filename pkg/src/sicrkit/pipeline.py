"""Grid orchestration: label, sample, split, fit and evaluate every definition."""
from __future__ import annotations

import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig
from .core import SicrDefinition, select_definitions
from .dataset import (LabeledPanel, build_panel, default_schema, engineer_features, split,
                      stratified_subsample)
from .errors import SicrError
from .evaluation import Evaluation, evaluate_definition
from .synth import Portfolio, gen_macro, gen_portfolio

log = logging.getLogger(__name__)


def definition_seeds(root_seed, definition: SicrDefinition):
    """(subsample, split, evaluation) seeds for one definition."""
    ss = np.random.SeedSequence([int(root_seed), definition.d, definition.s, definition.k])
    return tuple(int(x) for x in ss.generate_state(3, dtype=np.uint32))


def file_stem(label: str) -> str:
    """Filesystem-safe form of a definition label: ``1a(iv)`` -> ``1a_iv``."""
    return re.sub(r"[^0-9A-Za-z]+", "_", label).strip("_")


def load_or_simulate(cfg: RunConfig) -> Portfolio:
    if cfg.input_dir:
        return io.read_simulation(cfg.input_dir)
    sim = cfg.sim_config()
    return gen_portfolio(sim, gen_macro(sim))


def sample_and_split(panel: LabeledPanel, cfg: RunConfig):
    """Fixed-size stratified subsample, then the train/validation split."""
    sample_seed, split_seed, _ = definition_seeds(cfg.seed, panel.definition)
    target = min(cfg.sampling.target_rows, len(panel))
    sampled = stratified_subsample(panel, target, sample_seed)
    return split(sampled, cfg.sampling.train_fraction, split_seed, cfg.sampling.split_mode)


def evaluate_panels(train, valid, full, cfg: RunConfig) -> Evaluation:
    _, _, eval_seed = definition_seeds(cfg.seed, train.definition)
    return evaluate_definition(
        train.definition, train, valid, cost_ratio=cfg.evaluation.cost_ratio,
        replicates=cfg.evaluation.replicates, seed=eval_seed,
        post_crisis_start=cfg.post_crisis_month(), panel_full=full,
        ridge=cfg.modelling.ridge, fit_options=cfg.modelling.fit_options())


def run_definition(portfolio: Portfolio, definition: SicrDefinition, cfg: RunConfig,
                   features=None) -> Evaluation:
    panel = build_panel(portfolio, definition, default_schema(), features)
    train, valid = sample_and_split(panel, cfg)
    return evaluate_panels(train, valid, panel, cfg)


# worker-process state, set once per process by _init_worker
_WORKER = {}


def _init_worker(portfolio, cfg):
    _WORKER["portfolio"] = portfolio
    _WORKER["cfg"] = cfg
    _WORKER["features"] = engineer_features(portfolio)


def _work(definition):
    try:
        return definition, run_definition(_WORKER["portfolio"], definition, _WORKER["cfg"],
                                          _WORKER["features"]), None
    except Exception as err:  # reported per definition, run continues
        return definition, None, f"{type(err).__name__}: {err}"


@dataclass
class GridResult:
    evaluations: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def run_grid(cfg: RunConfig, out_dir=None, parallel=None, labels=None) -> GridResult:
    """Run every grid definition and write all artifacts under ``out_dir``.

    Results are collected in grid order whatever the parallelism, and each
    definition draws from its own seed stream, so output files depend only
    on the configuration.
    """
    out = Path(out_dir or cfg.output_dir)
    parallel = parallel or cfg.parallel
    grid = cfg.grid.definitions_list()
    labels = labels or cfg.grid.definitions
    if labels:
        grid = select_definitions(grid, labels)

    portfolio = load_or_simulate(cfg)
    if not cfg.input_dir:
        io.write_simulation(portfolio, out / "simulation")

    if parallel > 1:
        with ProcessPoolExecutor(parallel, initializer=_init_worker,
                                 initargs=(portfolio, cfg)) as pool:
            results = list(pool.map(_work, grid))
    else:
        _init_worker(portfolio, cfg)
        results = [_work(d) for d in grid]
        _WORKER.clear()

    evaluations, failures = [], []
    for definition, evaluation, error in results:
        if evaluation is None:
            log.error("definition %s failed: %s", definition.label, error)
            failures.append((definition.label, error))
            continue
        evaluations.append(evaluation)
        io.write_rates([evaluation.actual, evaluation.expected, evaluation.discrete],
                       out / "rates" / f"{file_stem(definition.label)}.csv")

    io.write_report([e.report for e in evaluations], out / "report.csv")
    if evaluations:
        series = {e.report.label: [e.actual, e.expected, e.discrete] for e in evaluations}
        io.write_plot_data(series, out / "plots" / "rates_long.csv")
        io.write_summary([e.report for e in evaluations], out / "summary.csv")
        if cfg.evaluation.plots:
            write_svg_charts(series, out / "plots")
    if failures:
        io.atomic_write(out / "failures.txt",
                        "".join(f"{label}\t{err}\n" for label, err in failures))
    return GridResult(evaluations, failures)


def write_svg_charts(series_by_label: dict, directory):
    """One static line chart per definition (actual, expected, discrete rates)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    # fixed id salt keeps the SVG bytes reproducible
    with matplotlib.rc_context({"svg.hashsalt": "sicrkit"}):
        for label, series in series_by_label.items():
            _svg_chart(plt, label, series, directory / f"{file_stem(label)}.svg")


def _svg_chart(plt, label, series, path):
    names = {"A": "actual", "B": "expected", "C": "discrete"}
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for s in series:
        ax.plot(s.months, s.rate, label=names.get(s.kind, s.kind))
    ax.set_title(f"SICR-rates, definition {label}")
    ax.set_xlabel("month index")
    ax.set_ylabel("rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
