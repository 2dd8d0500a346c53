import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sinhproj.levy_models import reference_model_I, reference_model_II, with_martingale_drift  # noqa: E402

R = 0.02


@pytest.fixture(scope="session")
def model_I():
    return with_martingale_drift(reference_model_I(), R, 0.0)


@pytest.fixture(scope="session")
def model_II():
    return with_martingale_drift(reference_model_II(), R, 0.0)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
