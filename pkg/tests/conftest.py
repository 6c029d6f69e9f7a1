import numpy as np
import pytest

from hsslab.lie_models import build_model

ACCEPTANCE_LINES: list[str] = []

ALL_MODELS = ("cp1", "ch1", "cp2", "gr24", "cp1xcp1", "ch1xch1")
COMPACT = ("cp1", "cp2", "gr24", "cp1xcp1")
NONCOMPACT = ("ch1", "ch1xch1")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def models():
    return {name: build_model(name) for name in ALL_MODELS}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
