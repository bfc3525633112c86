"""Command-line front end.

Exit codes: 0 success, 1 internal or domain error, 2 missing input file,
3 schema mismatch between artifacts.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import RunConfig, load_config
from .core import SicrDefinition, select_definitions
from .dataset import build_panel, default_schema
from .errors import SchemaMismatchError, SicrError
from .logit import fit
from .pipeline import evaluate_panels, file_stem, run_grid, sample_and_split
from .shapley import exact_linear_shapley, importance_ranking, mc_shapley
from .synth import gen_macro, gen_portfolio

log = logging.getLogger("sicrkit")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _definition(args, cfg: RunConfig) -> SicrDefinition:
    if args.definition:
        return select_definitions(cfg.grid.definitions_list(), [args.definition])[0]
    if None in (args.d, args.s, args.k):
        raise SicrError("bad-arguments", "give --definition LABEL or all of --d --s --k")
    for known in cfg.grid.definitions_list():
        if known.key == (args.d, args.s, args.k):
            return known
    return SicrDefinition(args.d, args.s, args.k)


def cmd_simulate(args):
    cfg = _config(args)
    sim = cfg.sim_config()
    portfolio = gen_portfolio(sim, gen_macro(sim))
    io.write_simulation(portfolio, args.out)
    print(f"wrote {len(portfolio)} loans to {args.out}")


def cmd_label(args):
    cfg = _config(args)
    portfolio = io.read_simulation(args.input)
    panel = build_panel(portfolio, _definition(args, cfg), default_schema())
    io.write_panel(panel, args.out)
    print(f"wrote {len(panel)} rows to {args.out}")


def cmd_sample(args):
    cfg = _config(args)
    panel = io.read_panel(args.panel)
    train, valid = sample_and_split(panel, cfg)
    out = Path(args.out)
    io.write_panel(train, out / "train.csv")
    io.write_panel(valid, out / "valid.csv")
    print(f"train {len(train)} rows, valid {len(valid)} rows")


def cmd_fit(args):
    cfg = _config(args)
    panel = io.read_panel(args.panel)
    model = fit(panel, ridge=cfg.modelling.ridge, **cfg.modelling.fit_options())
    io.write_model(model, args.out)
    print(f"converged={model.converged} iterations={model.iterations}")


def cmd_evaluate(args):
    cfg = _config(args)
    train = io.read_panel(args.train)
    valid = io.read_panel(args.valid)
    full = io.read_panel(args.full) if args.full else None
    for other in (valid, full):
        if other is not None and (other.schema.hash() != train.schema.hash()
                                  or other.definition.key != train.definition.key):
            raise SchemaMismatchError("panels disagree on schema or definition")
    evaluation = evaluate_panels(train, valid, full, cfg)
    out = Path(args.out)
    io.write_report([evaluation.report], out / "report.csv")
    io.write_rates([evaluation.actual, evaluation.expected, evaluation.discrete],
                   out / "rates" / f"{file_stem(train.definition.label)}.csv")
    io.write_model(evaluation.model, out / "model.txt")
    print(f"{evaluation.report.label}: auc={evaluation.report.auc:.4f}")


def cmd_attribute(args):
    cfg = _config(args)
    model = io.read_model(args.model)
    panel = io.read_panel(args.panel)
    if panel.schema.hash() != model.schema_hash:
        raise SchemaMismatchError("model and panel schema hashes differ")
    if args.rows and args.rows < len(panel):
        panel = panel.take(range(args.rows))
    exact = exact_linear_shapley(model, panel)
    approx = mc_shapley(model, panel, args.samples, cfg.seed)
    out = Path(args.out)
    io.write_attributions(exact, out / "attributions_exact.csv")
    io.write_attributions(approx, out / "attributions_mc.csv")
    io.write_ranking(importance_ranking(approx), out / "ranking.csv")
    print(f"attributed {len(panel)} rows")


def cmd_grid(args):
    cfg = _config(args)
    labels = [x.strip() for x in args.definitions.split(",")] if args.definitions else None
    result = run_grid(cfg, args.out, args.parallel, labels)
    for label, err in result.failures:
        print(f"[{label}] {err}", file=sys.stderr)
    print(f"{len(result.evaluations)} definitions evaluated, {len(result.failures)} failed")
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sicrkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "generate macro scenario and portfolio")
    p.add_argument("--out", required=True, help="output directory")

    p = add("label", cmd_label, "build a labelled panel for one definition")
    p.add_argument("--input", required=True, help="simulate output directory")
    p.add_argument("--definition", help="grid label such as 1a(i)")
    p.add_argument("--d", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True, help="panel CSV path")

    p = add("sample", cmd_sample, "stratified subsample and train/validation split")
    p.add_argument("--panel", required=True)
    p.add_argument("--out", required=True, help="directory for train.csv and valid.csv")

    p = add("fit", cmd_fit, "fit a logit model on a panel")
    p.add_argument("--panel", required=True)
    p.add_argument("--out", required=True, help="model text file")

    p = add("evaluate", cmd_evaluate, "fit on train, evaluate on validation")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--full", help="full panel for the actual/expected rate series")
    p.add_argument("--out", required=True)

    p = add("attribute", cmd_attribute, "exact and Monte Carlo Shapley attributions")
    p.add_argument("--model", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--rows", type=int, default=0, help="explain only the first N rows")
    p.add_argument("--out", required=True)

    p = add("grid", cmd_grid, "run the full definition grid")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--parallel", type=int, help="worker processes")
    p.add_argument("--definitions", help="comma-separated label filter")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except FileNotFoundError as err:
        print(f"error: missing input {err.filename or err}", file=sys.stderr)
        return 2
    except SchemaMismatchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except SicrError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - top-level guard
        log.exception("internal error")
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
