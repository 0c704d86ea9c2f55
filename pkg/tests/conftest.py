import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from resetfreq.hosidf_open import ResetController

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[num] = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def clegg():
    return ResetController.clegg(0.0)


@pytest.fixture
def fore():
    return ResetController.fore(300 * np.pi, 0.0)
