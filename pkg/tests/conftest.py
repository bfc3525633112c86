import numpy as np
import pytest

from sicrkit.synth import SimConfig, gen_macro, gen_portfolio
from sicrkit.core import SicrDefinition
from sicrkit.dataset import build_panel, default_schema, engineer_features


@pytest.fixture(scope="session")
def small_portfolio():
    cfg = SimConfig(n_loans=250, seed=17)
    return gen_portfolio(cfg, gen_macro(cfg))


@pytest.fixture(scope="session")
def small_features(small_portfolio):
    return engineer_features(small_portfolio)


@pytest.fixture(scope="session")
def panel_1a(small_portfolio, small_features):
    return build_panel(small_portfolio, SicrDefinition(1, 1, 3, "1a(i)"), default_schema(),
                       small_features)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from importlib import import_module
    try:
        lines = import_module("test_acceptance").RESULTS
    except ImportError:
        return
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
