import pytest

from insitu.limit import limit_constants
from insitu.recurrence import moments_exact

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def constants():
    return limit_constants()


@pytest.fixture(scope="session")
def big_table():
    return moments_exact(30_000)


@pytest.fixture(scope="session")
def rational_table():
    return moments_exact(200, mode="rational")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def report(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report
