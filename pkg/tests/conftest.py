import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcokey.distribution import pulse_count_distribution  # noqa: E402
from pcokey.dynamics import peskin_reference  # noqa: E402

_CRITERIA = []


@pytest.fixture(scope="session")
def dm():
    return peskin_reference()


@pytest.fixture(scope="session")
def dist(dm):
    return pulse_count_distribution(dm)


@pytest.fixture(scope="session")
def oracle():
    import oracles
    return oracles.Peskin()


@pytest.fixture(scope="session")
def oracle_lambdas(oracle):
    import oracles
    return oracles.lambdas(oracle)


@pytest.fixture
def criterion():
    """Record a one-line verdict for the acceptance summary."""
    def record(num, ok, detail):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append((num, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA, key=lambda x: x[0]):
        terminalreporter.write_line(line)
