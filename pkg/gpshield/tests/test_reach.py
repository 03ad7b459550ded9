import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ..geometry import Box
from ..gp import (
    Dataset,
    FeatureMap,
    KernelSpec,
    Layer,
    error_bound,
    fit,
    posterior_mean,
)
from ..reach import (
    ERROR_METHODS,
    MEAN_METHODS,
    IntervalVector,
    batch_mean_bounds,
    batch_post_bounds,
    kernel_range,
    mean_bounds,
    post,
    sup_error_bound,
)

corner = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False)
width = st.floats(min_value=0.0, max_value=0.8, allow_nan=False)


def _box(x0, x1, w0, w1):
    return Box([x0, x1], [x0 + w0, x1 + w1])


def _samples(box, size=300, seed=0):
    rng = np.random.default_rng(seed)
    points = rng.uniform(box.lower, box.upper, size=(size, box.dim))
    return np.vstack([points, box.lower, box.upper])


def test_kernel_range_examples(plane_regressor):
    model = plane_regressor.model(0)
    x = model.inputs[2]
    box = Box(x - 0.1, x + 0.2)
    lo, hi = kernel_range(plane_regressor, 0, box, 2)
    assert hi == pytest.approx(plane_regressor.kernel.signal_variance)
    assert lo < hi

    point = Box.point([0.3, -0.4])
    lo, hi = kernel_range(plane_regressor, 0, point, 1)
    exact = plane_regressor.kernel([[0.3, -0.4]], model.inputs[1:2])[0, 0]
    assert lo == pytest.approx(exact, abs=1e-12)
    assert hi == pytest.approx(exact, abs=1e-12)

    with pytest.raises(ValueError):
        kernel_range(plane_regressor, 0, box, model.size)


@pytest.mark.parametrize("method", MEAN_METHODS)
def test_degenerate_box_mean(plane_regressor, method):
    x = np.array([0.2, 0.7])
    bounds = mean_bounds(plane_regressor, 0, Box.point(x), method)
    expected = posterior_mean(plane_regressor, 0, x)
    np.testing.assert_allclose(bounds.lower, expected, atol=1e-9)
    np.testing.assert_allclose(bounds.upper, expected, atol=1e-9)


def test_zero_weights_mean():
    x = np.array([[0.0], [0.5], [1.0]])
    dataset = Dataset({0: x}, {0: np.zeros_like(x)}, noise_bound=0.0)
    reg = fit(dataset, KernelSpec(lengthscale=0.3), 0.1, 3, rkhs_bounds=1.0)
    bounds = mean_bounds(reg, 0, Box([0.1], [0.9]))
    np.testing.assert_array_equal(bounds.lower, [0.0])
    np.testing.assert_array_equal(bounds.upper, [0.0])


@settings(deadline=None, max_examples=200)
@given(corner, corner, width, width, st.sampled_from(MEAN_METHODS))
def test_mean_bounds_contain_samples(plane_regressor, x0, x1, w0, w1, method):
    box = _box(x0, x1, w0, w1)
    bounds = mean_bounds(plane_regressor, 0, box, method)
    values = posterior_mean(plane_regressor, 0, _samples(box))
    assert np.all(values >= bounds.lower - 1e-9)
    assert np.all(values <= bounds.upper + 1e-9)


@settings(deadline=None, max_examples=200)
@given(corner, corner, width, width, st.sampled_from(ERROR_METHODS))
def test_sup_error_bound_dominates_samples(plane_regressor, x0, x1, w0, w1, method):
    box = _box(x0, x1, w0, w1)
    bound = sup_error_bound(plane_regressor, 0, box, 0.01, method)
    values = error_bound(plane_regressor, 0, _samples(box), 0.01)
    assert np.all(values <= bound + 1e-9)


def test_subdivisions_stay_sound(plane_regressor):
    box = Box([-0.6, -0.2], [0.4, 0.6])
    values = error_bound(plane_regressor, 0, _samples(box, seed=4), 0.05)
    coarse = sup_error_bound(plane_regressor, 0, box, 0.05, subdivisions=1)
    fine = sup_error_bound(plane_regressor, 0, box, 0.05, subdivisions=4)
    assert np.all(values <= fine + 1e-9)
    assert np.all(fine <= coarse + 1e-9)

    lo, hi = batch_post_bounds(
        plane_regressor, 0, box.lower[None], box.upper[None], subdivisions=3
    )
    means = posterior_mean(plane_regressor, 0, _samples(box, seed=4))
    assert np.all(means >= lo - 1e-9) and np.all(means <= hi + 1e-9)


def test_degenerate_box_error(plane_regressor):
    x = np.array([-0.3, 0.1])
    pointwise = error_bound(plane_regressor, 0, x, 0.01)
    for method in ERROR_METHODS:
        bound = sup_error_bound(plane_regressor, 0, Box.point(x), 0.01, method)
        assert np.all(bound >= pointwise - 1e-9)
        assert np.all(bound <= 1.1 * pointwise + 1e-9)


def test_far_box_error(plane_regressor):
    limit = np.sqrt(plane_regressor.kernel.signal_variance) * plane_regressor.beta
    bound = sup_error_bound(plane_regressor, 0, Box([50.0, 50.0], [51.0, 51.0]), 0.01)
    assert np.all(bound >= limit - 1e-9)
    np.testing.assert_allclose(bound, limit, atol=1e-9)


def test_post_with_point_noise(plane_regressor):
    box = Box([0.0, 0.0], [0.3, 0.2])
    bounds = mean_bounds(plane_regressor, 0, box)
    image = post(plane_regressor, 0, box, Box.point([0.0, 0.0]))
    assert image == bounds.to_box()
    shifted = post(plane_regressor, 0, box, Box([-0.1, 0.0], [0.1, 0.05]))
    np.testing.assert_allclose(shifted.lower, bounds.lower + [-0.1, 0.0])
    np.testing.assert_allclose(shifted.upper, bounds.upper + [0.1, 0.05])


def test_shrinking_boxes_converge(plane_regressor):
    x = np.array([0.25, -0.35])
    image = posterior_mean(plane_regressor, 0, x)
    distances = []
    for radius in [0.4, 0.2, 0.1, 0.05, 0.01, 1e-4]:
        bounds = mean_bounds(plane_regressor, 0, Box(x - radius, x + radius))
        distances.append(
            np.max(np.maximum(image - bounds.lower, bounds.upper - image))
        )
    assert all(b <= a + 1e-12 for a, b in zip(distances, distances[1:]))
    assert distances[-1] < 1e-2


def test_feature_map_enclosure():
    psi = FeatureMap((Layer([[1.0, 0.5], [-0.4, 1.2]], [0.0, 0.1]),))
    rng = np.random.default_rng(8)
    x = rng.uniform(-1.0, 1.0, size=(6, 2))
    dataset = Dataset({0: x}, {0: x**2}, noise_bound=0.02)
    reg = fit(
        dataset, KernelSpec(lengthscale=0.6, feature_map=psi), 0.1, 6, rkhs_bounds=1.0
    )
    box = Box([-0.3, 0.1], [0.2, 0.5])
    bounds = mean_bounds(reg, 0, box)
    values = posterior_mean(reg, 0, _samples(box, seed=9))
    assert np.all(values >= bounds.lower - 1e-9)
    assert np.all(values <= bounds.upper + 1e-9)
    with pytest.raises(ValueError, match="base kernel"):
        mean_bounds(reg, 0, box, method="taylor")


def test_unknown_methods(plane_regressor):
    box = Box([0.0, 0.0], [0.1, 0.1])
    with pytest.raises(ValueError):
        batch_mean_bounds(plane_regressor, 0, box.lower, box.upper, method="affine")
    with pytest.raises(ValueError):
        sup_error_bound(plane_regressor, 0, box, 0.1, method="exact")


def test_interval_vector():
    a = IntervalVector([0.0, 1.0], [1.0, 2.0])
    b = IntervalVector([-1.0, 0.0], [0.0, 0.5])
    total = a + b
    np.testing.assert_array_equal(total.lower, [-1.0, 1.0])
    np.testing.assert_array_equal(total.width, [2.0, 1.5])
    assert a.contains([0.5, 1.5])
    with pytest.raises(ValueError):
        IntervalVector([1.0], [0.0])
