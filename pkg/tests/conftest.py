import pytest

from hmchisq.data_io import carvedilol_dataset
from hmchisq.numerics import RngStream


@pytest.fixture
def carvedilol():
    return carvedilol_dataset()


@pytest.fixture
def rng():
    return RngStream(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
