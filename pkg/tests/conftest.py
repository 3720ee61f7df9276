"""Shared fixtures and the acceptance-criteria reporting hook."""

import numpy as np
import pytest

from tfsr import frames

ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail="", expected_fail=False):
    """Register one acceptance-criterion outcome for the terminal summary."""
    status = "PASS" if passed else ("FAIL (expected)" if expected_fail else "FAIL")
    line = f"[ACCEPTANCE] {name}: {status}"
    if detail:
        line += f" - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_op():
    return frames.generate_sensing(32, 64, "gaussian", seed=3)


@pytest.fixture(scope="session")
def small_dct():
    return frames.overcomplete_dct(64, 256, seed=0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
