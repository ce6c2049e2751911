import pytest

from permwalk.perm import sample_uniform
from permwalk.rng import RngSeed

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_sigmas(n, count, master=12345):
    return [sample_uniform(n, RngSeed(master, (n << 32) | i)) for i in range(count)]


@pytest.fixture
def sigmas():
    return random_sigmas
