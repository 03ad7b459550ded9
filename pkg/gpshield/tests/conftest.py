import numpy as np
import pytest

from ..geometry import Box, build_partition
from ..gp import Dataset, KernelSpec, fit
from ..systems import linear, sample_transitions


@pytest.fixture(scope="session")
def line_system():
    """One-dimensional affine system on [0, 1] with small uniform noise."""
    return linear(noise_bound=0.01)


@pytest.fixture(scope="session")
def line_regressor(line_system):
    dataset = sample_transitions(line_system, 40, seed=1)
    return fit(
        dataset,
        KernelSpec(signal_variance=1.0, lengthscale=0.3),
        noise_std=0.1,
        budget=40,
        rkhs_bounds=2.0,
    )


@pytest.fixture(scope="session")
def plane_regressor():
    """Two-dimensional regressor on five scattered points of one action."""
    rng = np.random.default_rng(3)
    x = rng.uniform(-1.0, 1.0, size=(5, 2))
    y = np.stack([np.sin(x[:, 0]) + x[:, 1], np.cos(x[:, 1])], axis=1)
    dataset = Dataset({0: x}, {0: y}, noise_bound=0.05)
    return fit(
        dataset,
        KernelSpec(signal_variance=1.5, lengthscale=0.7),
        noise_std=0.2,
        budget=5,
        rkhs_bounds=[1.0, 2.0],
        gamma=[0.1, 0.5],
    )


@pytest.fixture
def square_partition():
    domain = Box([-2.0, -2.0], [2.0, 2.0])
    return build_partition(domain, (4, 4), [("g", Box([0.0, 0.0], [1.0, 1.0]))])
