import re

import numpy as np
import pytest

from lpwanmodem.phy import DEFAULT_PARAMS

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


def _criterion_order(line: str):
    tag = line.split()[1]
    return int(re.match(r"C(\d+)", tag).group(1)), tag


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_order):
            terminalreporter.write_line(line)


@pytest.fixture
def verdicts(request):
    """List collecting one PASS/FAIL line per acceptance criterion."""
    return request.config.stash[_VERDICTS]


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
