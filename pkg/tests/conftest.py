import numpy as np
import pytest

import mcsfb

_criterion_lines = []


def record_criterion(line):
    """Collect one pass/fail line per acceptance criterion for the summary."""
    _criterion_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


def make_operator(graph, variant="combinatorial"):
    L = mcsfb.build_laplacian(graph, variant=variant)
    mcsfb.estimate_lambda_max(L)
    return L


def ring_eigenvalues(n):
    # 2 - 2 cos(2 pi l / n), each nonzero frequency twice (except n/2 for even n)
    ell = np.arange(n)
    return np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * ell / n))


@pytest.fixture(scope="session")
def ring8():
    return mcsfb.generate_graph("ring", n=8)


@pytest.fixture(scope="session")
def ring64():
    return mcsfb.generate_graph("ring", n=64)


@pytest.fixture(scope="session")
def sensor100():
    return mcsfb.generate_graph("random_sensor", n=100, seed=0)


@pytest.fixture(scope="session")
def ring64_op(ring64):
    return make_operator(ring64)


@pytest.fixture(scope="session")
def sensor100_op(sensor100):
    return make_operator(sensor100)


@pytest.fixture(scope="session")
def sensor100_eig(sensor100_op):
    return mcsfb.dense_eigendecomposition(sensor100_op)
