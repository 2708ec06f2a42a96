import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=30, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance_record():
    """Call with (criterion number, passed, detail) to log a summary line."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
