"""Run configuration: a sectioned INI file with a documented default for every key.

::

    [run]
    seed = 20240101          ; root seed for every random stream
    output_dir = sicr-out    ; where run_grid writes artifacts
    parallel = 1             ; worker processes for grid entries
    input_dir =              ; existing simulate output to ingest instead of simulating

    [simulation]             ; any SimConfig field; months as YYYY-MM
    n_loans = 3000
    crisis_start = 2008-07

    [grid]
    d = 1, 2
    s = 1, 2, 3
    k = 3, 6, 9, 12
    extended_k = 18, 24, 36  ; extra outcome periods for class 1a (d=1, s=1)
    definitions =            ; optional label filter, e.g. 1a(i), 2c(iv)

    [sampling]
    target_rows = 60000      ; fixed subsample size (capped at panel size)
    train_fraction = 0.7
    split_mode = observation ; or: account

    [modelling]
    ridge = 1e-6
    grad_tol = 1e-8
    llf_tol = 1e-10
    max_iter = 100

    [evaluation]
    cost_ratio = 6
    replicates = 1000
    post_crisis_start =      ; default: first month after the crisis window
    plots = false            ; also emit SVG line charts

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .core import CANONICAL_D, CANONICAL_K, CANONICAL_S, EXTENDED_K, definition_grid, merge_grids
from .errors import SicrError
from .months import format_month, parse_month
from .synth import SimConfig

_MONTH_FIELDS = {"window_start", "window_end", "crisis_start", "crisis_end"}


@dataclass
class GridConfig:
    d: tuple = CANONICAL_D
    s: tuple = CANONICAL_S
    k: tuple = CANONICAL_K
    extended_k: tuple = tuple(k for k in EXTENDED_K if k not in CANONICAL_K)
    definitions: tuple = ()

    def definitions_list(self):
        grid = definition_grid(self.d, self.s, self.k)
        if self.extended_k and 1 in self.d and 1 in self.s:
            grid = merge_grids(grid, definition_grid([1], [1], sorted({*self.k, *self.extended_k})))
        return grid


@dataclass
class SamplingConfig:
    target_rows: int = 60000
    train_fraction: float = 0.7
    split_mode: str = "observation"


@dataclass
class ModellingConfig:
    ridge: float = 1e-6
    grad_tol: float = 1e-8
    llf_tol: float = 1e-10
    max_iter: int = 100

    def fit_options(self):
        return {"grad_tol": self.grad_tol, "llf_tol": self.llf_tol, "max_iter": self.max_iter}


@dataclass
class EvaluationConfig:
    cost_ratio: float = 6.0
    replicates: int = 1000
    post_crisis_start: int | None = None
    plots: bool = False


@dataclass
class RunConfig:
    seed: int = 20240101
    output_dir: str = "sicr-out"
    parallel: int = 1
    input_dir: str = ""
    simulation: SimConfig = field(default_factory=SimConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    modelling: ModellingConfig = field(default_factory=ModellingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def sim_config(self) -> SimConfig:
        """Simulation settings with the run seed applied."""
        return replace(self.simulation, seed=self.seed)

    def post_crisis_month(self) -> int:
        if self.evaluation.post_crisis_start is not None:
            return self.evaluation.post_crisis_start
        sim = self.simulation
        return sim.crisis_end + 1 if sim.has_crisis else sim.model_start

    def with_seed(self, seed) -> "RunConfig":
        return replace(self, seed=int(seed))


def _int_list(text):
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _coerce(name, default, text):
    text = text.strip()
    if name in _MONTH_FIELDS or name == "post_crisis_start":
        return parse_month(text) if text else None
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, tuple):
        if name == "definitions":
            return tuple(v.strip() for v in text.split(",") if v.strip())
        return _int_list(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def _apply(obj, section, items):
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, text in items:
        if key not in known:
            raise SicrError("bad-config", f"unknown key [{section}] {key}")
        try:
            updates[key] = _coerce(key, getattr(obj, key), text)
        except ValueError as err:
            raise SicrError("bad-config", f"[{section}] {key}: {err}") from err
    return replace(obj, **updates)


def load_config(path=None, text=None) -> RunConfig:
    """Parse an INI config; missing keys keep their defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    parser.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(str(p))
        text = p.read_text()
    if text:
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise SicrError("bad-config", str(err).splitlines()[0]) from err
    cfg = RunConfig()
    sections = {"run", "simulation", "grid", "sampling", "modelling", "evaluation"}
    unknown = set(parser.sections()) - sections
    if unknown:
        raise SicrError("bad-config", f"unknown section(s) {sorted(unknown)}")
    if parser.has_section("run"):
        run_items = dict(parser.items("run"))
        base = {k: getattr(cfg, k) for k in ("seed", "output_dir", "parallel", "input_dir")}
        for key in run_items:
            if key not in base:
                raise SicrError("bad-config", f"unknown key [run] {key}")
        cfg = replace(cfg, **{k: _coerce(k, base[k], v) for k, v in run_items.items()})
    if parser.has_option("simulation", "seed"):
        raise SicrError("bad-config", "set the seed under [run], not [simulation]")
    for name in ("simulation", "grid", "sampling", "modelling", "evaluation"):
        if parser.has_section(name):
            cfg = replace(cfg, **{name: _apply(getattr(cfg, name), name, parser.items(name))})
    cfg.simulation.validate()
    if cfg.sampling.split_mode not in ("observation", "account"):
        raise SicrError("bad-config", f"split_mode {cfg.sampling.split_mode!r}")
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """INI text that :func:`load_config` parses back to ``cfg``."""
    def fmt(name, value):
        if name in _MONTH_FIELDS or (name == "post_crisis_start" and value is not None):
            return format_month(value)
        if value is None:
            return ""
        if isinstance(value, bool):
            return str(value).lower()
        if isinstance(value, tuple):
            return ", ".join(str(v) for v in value)
        return repr(value) if isinstance(value, float) else str(value)

    out = ["[run]"]
    for key in ("seed", "output_dir", "parallel", "input_dir"):
        out.append(f"{key} = {fmt(key, getattr(cfg, key))}")
    for name in ("simulation", "grid", "sampling", "modelling", "evaluation"):
        out.append(f"\n[{name}]")
        section = getattr(cfg, name)
        for f in fields(section):
            if name == "simulation" and f.name == "seed":
                continue
            out.append(f"{f.name} = {fmt(f.name, getattr(section, f.name))}")
    return "\n".join(out) + "\n"
