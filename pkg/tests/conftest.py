import sys

import numpy as np
import pytest

from finslerslip.finsler import FinslerChart, RandersField, example31_chart


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def line31():
    return example31_chart()


@pytest.fixture(scope="session")
def wide31():
    from finslerslip.finsler import Example31Field
    return FinslerChart([[-50.0, 50.0]], Example31Field(), (11,))


@pytest.fixture(scope="session")
def randers2d():
    return FinslerChart([[-1.0, 1.0], [-1.0, 1.0]], RandersField([0.4, 0.1]), (11, 11))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
