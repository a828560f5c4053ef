import pytest

from gfdlab import benchmarks

ACCEPTANCE_LINES = []


@pytest.fixture
def constant_model():
    return benchmarks.constant_rate_model()


@pytest.fixture
def logramp():
    return benchmarks.logramp_model()


@pytest.fixture
def record_acceptance():
    def _record(line):
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
