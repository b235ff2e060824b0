import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Return ``report(number, ok, detail)`` that records one PASS/FAIL/SKIP line."""

    def report(number, ok, detail):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        line = f"{status} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
