import numpy as np
import pytest

from sparsemimo.model import ArrayTopology, FrequencyGrid
from sparsemimo.topologies import uniform_linear


def small_instance(rng, n_f=None, n_tx=None, n_rx=None, n_pix=None):
    """Random instance within 3 freqs, 3 tx, 8 rx and 10 pixels."""
    n_f = n_f or int(rng.integers(2, 4))
    n_tx = n_tx or int(rng.integers(1, 4))
    n_rx = n_rx or int(rng.integers(1, 9))
    n_pix = n_pix or int(rng.integers(1, 11))
    tx = np.column_stack([rng.uniform(-0.2, 0.2, n_tx), np.zeros(n_tx),
                          rng.uniform(-0.2, 0.2, n_tx)])
    rx = np.column_stack([rng.uniform(-0.2, 0.2, n_rx), np.zeros(n_rx),
                          rng.uniform(-0.2, 0.2, n_rx)])
    pix = np.column_stack([rng.uniform(-0.1, 0.1, n_pix), rng.uniform(0.8, 1.2, n_pix),
                           rng.uniform(-0.1, 0.1, n_pix)])
    f0 = rng.uniform(10e9, 30e9)
    return (FrequencyGrid(f0, f0 + rng.uniform(0.5e9, 5e9), n_f),
            ArrayTopology(tx, rx), pix)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def linear_setup():
    """2 tx / 26 rx linear array at 30-35 GHz, 101 steps, R0 = 1 m."""
    return (FrequencyGrid(30e9, 35e9, 101), uniform_linear(2, 0.52, 26, 0.02), 1.0)


ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str):
    """Store one pass/fail line for the acceptance summary."""
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
