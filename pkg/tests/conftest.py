import numpy as np
import pytest

from doeblinmc.chain import DenseDistribution, DenseKernel, StateSpace

ACCEPTANCE_LINES = []


def random_kernel(rng, n, concentration=1.0):
    rows = rng.dirichlet(np.full(n, concentration), size=n)
    return DenseKernel(StateSpace.flat(n), rows / rows.sum(axis=1, keepdims=True))


def random_dist(rng, n, concentration=1.0):
    return DenseDistribution.normalized(StateSpace.flat(n), rng.dirichlet(np.full(n, concentration)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report():
    def _report(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}")
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
