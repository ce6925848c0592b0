import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rbaccess.dynamics import ObservationModel, TransitionModel  # noqa: E402

# default chain: stay idle 0.85, busy->idle 0.9
DEFAULT_CHAIN = TransitionModel(0.15, 0.9)


@pytest.fixture
def chain():
    return DEFAULT_CHAIN


@pytest.fixture
def rng():
    return np.random.default_rng(20160701)


@pytest.fixture
def obs_01():
    return ObservationModel(0.1, 0.1)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
