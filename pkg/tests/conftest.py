import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oqrsim.rotor import molecule  # noqa: E402


@pytest.fixture(scope="session")
def hcn():
    return molecule("HCN")


ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
