import numpy as np
import pytest

from pureconf.linops import ImageGrid, LinearOperatorSpec, gaussian_kernel
from pureconf.poisson import PoissonForwardModel


def circular_convolve(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Direct periodic convolution of an (H, W) array, centered kernel."""
    h, wd = x.shape
    half = w.shape[0] // 2
    out = np.zeros_like(x, dtype=float)
    for r in range(h):
        for c in range(wd):
            acc = 0.0
            for i in range(w.shape[0]):
                for j in range(w.shape[1]):
                    acc += w[i, j] * x[(r - (i - half)) % h, (c - (j - half)) % wd]
            out[r, c] = acc
    return out


def random_kernel(rng, size=5) -> np.ndarray:
    w = rng.random((size, size))
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blur8():
    op = LinearOperatorSpec.convolution((8, 8, 1), gaussian_kernel(1.0, 7))
    return PoissonForwardModel(op, 60.0)


@pytest.fixture
def identity8():
    return PoissonForwardModel(LinearOperatorSpec.identity((8, 8, 1)), 4.0)


def image(arr) -> ImageGrid:
    return ImageGrid.from_array(np.asarray(arr, dtype=float))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
