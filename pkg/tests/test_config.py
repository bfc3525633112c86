import pytest

from sicrkit.config import RunConfig, dump_config, load_config
from sicrkit.errors import SicrError
from sicrkit.months import parse_month


def test_defaults():
    cfg = load_config(text="")
    assert cfg == RunConfig()
    assert cfg.evaluation.cost_ratio == 6.0
    assert cfg.sampling.train_fraction == 0.7
    assert len(cfg.grid.definitions_list()) == 27
    assert cfg.post_crisis_month() == parse_month("2010-07")


def test_parse_sections():
    cfg = load_config(text="""
[run]
seed = 7
parallel = 2
[simulation]
n_loans = 50
crisis_start = 2009-01   ; inline comment
[grid]
d = 1
s = 1, 2
k = 3 6
extended_k =
definitions = 1a(i), 1b(ii)
[sampling]
split_mode = account
[modelling]
ridge = 0.01
[evaluation]
replicates = 200
post_crisis_start = 2011-01
plots = yes
""")
    assert cfg.seed == 7 and cfg.parallel == 2
    assert cfg.simulation.n_loans == 50
    assert cfg.simulation.crisis_start == parse_month("2009-01")
    assert cfg.sim_config().seed == 7
    assert cfg.grid.k == (3, 6) and cfg.grid.extended_k == ()
    assert [d.label for d in cfg.grid.definitions_list()] == ["1a(i)", "1a(ii)", "1b(i)",
                                                              "1b(ii)"]
    assert cfg.grid.definitions == ("1a(i)", "1b(ii)")
    assert cfg.sampling.split_mode == "account"
    assert cfg.modelling.ridge == 0.01
    assert cfg.evaluation.plots is True
    assert cfg.post_crisis_month() == parse_month("2011-01")


def test_canonical_grid_without_extension():
    cfg = load_config(text="[grid]\nextended_k =\n")
    assert len(cfg.grid.definitions_list()) == 24


@pytest.mark.parametrize("text", [
    "[run]\nseeed = 3\n",
    "[extra]\nx = 1\n",
    "[simulation]\nn_loan = 3\n",
    "[simulation]\nseed = 3\n",
    "[sampling]\nsplit_mode = random\n",
    "[evaluation]\nplots = maybe\n",
    "[simulation]\ncrisis_start = July\n",
    "[run]\nseed = 1\n[run]\nseed = 2\n",
])
def test_rejects_bad_config(text):
    with pytest.raises(SicrError, match="bad-config"):
        load_config(text=text)


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.ini")


def test_dump_round_trip(tmp_path):
    cfg = load_config(text="[run]\nseed = 11\n[grid]\nk = 3, 9\n[evaluation]\npost_crisis_start = 2012-03\n")
    path = tmp_path / "c.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    assert load_config(text=dump_config(RunConfig())) == RunConfig()
