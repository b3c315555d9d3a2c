import pytest

from milnor import crypto

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def shipped_catalog():
    return crypto.load_catalog()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
