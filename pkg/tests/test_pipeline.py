import numpy as np
import pytest

from sicrkit import io
from sicrkit.cli import main
from sicrkit.config import load_config
from sicrkit.core import SicrDefinition
from sicrkit.pipeline import definition_seeds, file_stem, run_grid

BASE = """
[run]
seed = 3
[simulation]
n_loans = 400
[sampling]
target_rows = 8000
[evaluation]
replicates = 100
"""


def _cfg(extra=""):
    return load_config(text=BASE + extra)


def test_file_stem():
    assert file_stem("1a(iv)") == "1a_iv"
    assert file_stem("2c(vii)") == "2c_vii"


def test_definition_seeds_distinct():
    a = definition_seeds(1, SicrDefinition(1, 1, 3))
    assert a == definition_seeds(1, SicrDefinition(1, 1, 3, "other label"))
    assert a != definition_seeds(1, SicrDefinition(1, 1, 6))
    assert a != definition_seeds(2, SicrDefinition(1, 1, 3))
    assert len(set(a)) == 3


@pytest.mark.slow
def test_canonical_grid_report(tmp_path):
    # enough loans that the rare d=2 events reach both partitions
    cfg = load_config(text=BASE.replace("n_loans = 400", "n_loans = 1500").replace(
        "target_rows = 8000", "target_rows = 30000") + "[grid]\nextended_k =\n")
    result = run_grid(cfg, tmp_path)
    assert result.ok
    reports = io.read_report(tmp_path / "report.csv")
    labels = [r.label for r in reports]
    assert len(labels) == 24
    assert labels[:5] == ["1a(i)", "1a(ii)", "1a(iii)", "1a(iv)", "1b(i)"]
    assert labels[-1] == "2c(iv)"
    assert len(list((tmp_path / "rates").iterdir())) == 24
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("label,d,s,k,prevalence,auc")
    assert len(summary) == 25


def test_extended_1a_grid(tmp_path):
    cfg = _cfg("[grid]\nd = 1\ns = 1\nk = 3, 6, 9, 12, 18, 24, 36\nextended_k =\n")
    result = run_grid(cfg, tmp_path)
    reports = io.read_report(tmp_path / "report.csv")
    assert [r.k for r in reports] == [3, 6, 9, 12, 18, 24, 36]
    assert reports[-1].label == "1a(vii)"
    assert result.ok


def test_parallel_matches_serial(tmp_path):
    cfg = _cfg("[grid]\ndefinitions = 1a(i), 1b(ii), 2a(i)\n")
    run_grid(cfg, tmp_path / "serial", parallel=1)
    run_grid(cfg, tmp_path / "par", parallel=2)
    for rel in ("report.csv", "summary.csv", "rates/1b_ii.csv", "plots/rates_long.csv"):
        assert (tmp_path / "serial" / rel).read_bytes() == (tmp_path / "par" / rel).read_bytes()


def test_failures_keep_partial_results(tmp_path, capsys):
    # an outcome period longer than every history leaves an empty panel
    (tmp_path / "cfg.ini").write_text(BASE + "[grid]\nd = 1\ns = 1\nk = 3, 400\nextended_k =\n")
    code = main(["grid", "--config", str(tmp_path / "cfg.ini"), "--out", str(tmp_path / "out")])
    assert code == 1
    err = capsys.readouterr().err
    assert "[1a(ii)]" in err
    reports = io.read_report(tmp_path / "out" / "report.csv")
    assert [r.label for r in reports] == ["1a(i)"]
    assert "1a(ii)" in (tmp_path / "out" / "failures.txt").read_text()


def test_ingest_existing_simulation(tmp_path):
    cfg = _cfg("[grid]\ndefinitions = 1a(i)\n")
    run_grid(cfg, tmp_path / "first")
    from dataclasses import replace
    ingest = replace(cfg, input_dir=str(tmp_path / "first" / "simulation"))
    run_grid(ingest, tmp_path / "second")
    assert not (tmp_path / "second" / "simulation").exists()
    assert ((tmp_path / "first" / "report.csv").read_bytes()
            == (tmp_path / "second" / "report.csv").read_bytes())


def test_svg_charts(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = _cfg("[grid]\ndefinitions = 1a(i)\n").with_seed(3)
    cfg.evaluation.plots = True
    run_grid(cfg, tmp_path)
    svg = (tmp_path / "plots" / "1a_i.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    again = tmp_path / "again"
    run_grid(cfg, again)
    assert (again / "plots" / "1a_i.svg").read_bytes() == (tmp_path / "plots" / "1a_i.svg").read_bytes()
