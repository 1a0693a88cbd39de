import numpy as np
import pytest

from gperrprop.gp import Dataset, fit
from gperrprop.kernel import KernelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def one_point_model():
    """N = 1, X = [[0]], y = [1], length scale 1, noise variance 0.1."""
    return fit(Dataset([[0.0]], [1.0]), KernelParams(1.0), 0.1)


def random_problem(rng, n, d, noise_var=None, length_scale=None):
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    y = np.sin(2.0 * X).sum(axis=1) + 0.1 * rng.standard_normal(n)
    ls = length_scale if length_scale is not None else rng.uniform(0.3, 2.0)
    nv = noise_var if noise_var is not None else 10.0 ** rng.uniform(-3, 0)
    return Dataset(X, y), KernelParams(ls), nv


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
