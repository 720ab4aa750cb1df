import numpy as np
import pytest

from fairrisk.boosting import BoostConfig, train
from fairrisk.synth import SynthConfig, generate
from fairrisk.tabular import Group, filter_group


@pytest.fixture(scope="session")
def synth_small():
    return generate(SynthConfig(n_per_group=600, seed=11))


@pytest.fixture(scope="session")
def small_model(synth_small):
    base = filter_group(synth_small, Group.BASELINE)
    return train(base, BoostConfig(n_trees=40, max_depth=2, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
