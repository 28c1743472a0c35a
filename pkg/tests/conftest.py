import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

ACCEPTANCE_LINES = []


@pytest.fixture
def fixture_path():
    def get(name):
        return str(FIXTURES / name)
    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
