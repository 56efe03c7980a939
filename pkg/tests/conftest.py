import numpy as np
import pytest

from risoam.config import default_config
from risoam.scenario import build_scenario, noise_for_snr


@pytest.fixture(scope="session")
def default_cfg():
    return default_config().resolved()


@pytest.fixture(scope="session")
def default_scenario(default_cfg):
    return build_scenario(default_cfg)


@pytest.fixture(scope="session")
def scenario_10db(default_scenario):
    """Reference geometry with noise rescaled to a 10 dB mean per-mode SNR."""
    return default_scenario.with_config(noise_power=noise_for_snr(default_scenario, 10.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance verdicts, one line per criterion, collected by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
