import numpy as np
import pytest

from phasecoh.costfn import CostFunction


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def holevo():
    return CostFunction.holevo()


def rand_herm(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def rand_kraus(rng, d_in, d_out, k=3):
    """Random Kraus set via an isometry d_in -> d_out*k."""
    k = max(k, -(-d_in // d_out))
    g = rng.normal(size=(d_out * k, d_in)) + 1j * rng.normal(size=(d_out * k, d_in))
    q, _ = np.linalg.qr(g)
    return [q[i * d_out:(i + 1) * d_out] for i in range(k)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
