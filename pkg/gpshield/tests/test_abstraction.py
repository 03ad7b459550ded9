import numpy as np
import pytest

from ..abstraction import (
    OUTSIDE,
    Imdp,
    IntervalTable,
    build_imdp,
    read_imdp,
    transition_bounds,
    write_imdp,
)
from ..geometry import Box, NoiseCells, build_partition, partition_noise
from ..gp import Dataset, KernelSpec, fit
from ..reach import post, sup_error_bound


def _noise(probabilities, dim=2):
    k = len(probabilities)
    zero = np.zeros((k, dim))
    return NoiseCells(zero, zero.copy(), np.asarray(probabilities, dtype=float))


@pytest.fixture(scope="module")
def line_imdp(line_regressor):
    partition = build_partition(Box([0.0], [1.0]), 8)
    noise = partition_noise(0.01, 2, dim=1)
    imdp = build_imdp(line_regressor, partition, noise, delta=0.01)
    return imdp, partition, noise


def test_posts_inside_target():
    target = Box([0.0, 0.0], [1.0, 1.0])
    posts = [Box([0.4, 0.4], [0.6, 0.6])]
    lower, upper = transition_bounds(posts, (0.01, 0.01), 0.1, target, _noise([1]))
    assert lower == pytest.approx(0.81)
    assert upper == pytest.approx(1.0)


def test_posts_disjoint_from_target():
    target = Box([0.0, 0.0], [1.0, 1.0])
    posts = [Box([2.0, 2.0], [2.5, 2.5])]
    lower, upper = transition_bounds(posts, (0.01, 0.01), 0.1, target, _noise([1]))
    assert lower == 0.0
    assert upper == pytest.approx(0.19)


def test_exact_split_without_confidence_loss():
    target = Box([0.0, 0.0], [1.0, 1.0])
    posts = [Box([0.2, 0.2], [0.3, 0.3]), Box([3.0, 3.0], [3.1, 3.1])]
    noise = _noise([0.5, 0.5])
    lower, upper = transition_bounds(posts, (0.0, 0.0), 0.0, target, noise)
    assert lower == pytest.approx(0.5)
    assert upper == pytest.approx(0.5)


def test_straddling_post_and_error_margin():
    target = Box([0.0], [1.0])
    straddling = [Box([0.9], [1.1])]
    assert transition_bounds(straddling, 0.0, 0.0, target, _noise([1.0], 1)) == (
        0.0,
        1.0,
    )
    # inside, but the error margin reaches the face
    near_face = [Box([0.5], [0.95])]
    lower, upper = transition_bounds(near_face, 0.1, 0.0, target, _noise([1.0], 1))
    assert (lower, upper) == (0.0, 1.0)


def test_outside_target():
    domain = Box([0.0], [1.0])
    noise = _noise([0.5, 0.5], 1)
    posts = [Box([1.5], [1.6]), Box([0.2], [0.3])]
    lower, upper = transition_bounds(posts, 0.0, 0.0, OUTSIDE, noise, domain=domain)
    assert (lower, upper) == (0.5, 0.5)
    with pytest.raises(ValueError):
        transition_bounds(posts, 0.0, 0.0, OUTSIDE, noise)
    with pytest.raises(ValueError):
        transition_bounds(posts[:1], 0.0, 0.0, domain, noise)
    with pytest.raises(ValueError):
        transition_bounds(posts, 0.0, 1.0, domain, noise)


def test_point_mass_dynamics():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.5, 1.5, size=(4, 2))
    dataset = Dataset({0: x}, {0: np.zeros_like(x)}, noise_bound=0.0)
    reg = fit(dataset, KernelSpec(), 0.1, 4, rkhs_bounds=0.0)
    partition = build_partition(Box([-1.5, -1.5], [1.5, 1.5]), (3, 3))
    imdp = build_imdp(reg, partition, partition_noise(0.0, 1, dim=2), delta=1e-12)
    lower, upper = imdp.dense()
    center = int(partition.locate([0.0, 0.0]))
    cells = np.arange(partition.n_cells)
    np.testing.assert_allclose(lower[cells, 0, center], 1.0, atol=1e-9)
    np.testing.assert_allclose(upper[cells, 0, center], 1.0, atol=1e-9)
    others = np.delete(np.arange(partition.n_states), center)
    assert np.all(upper[np.ix_(cells, [0], others)] <= 1e-9)
    assert np.all(lower[np.ix_(cells, [0], others)] == 0.0)


def test_imdp_structure(line_imdp):
    imdp, partition, _ = line_imdp
    assert imdp.n_states == partition.n_states == 9
    assert imdp.actions == (0, 1)
    assert imdp.ap == ("b",)
    lower, upper = imdp.dense()
    assert np.all(lower <= upper + 1e-12)
    assert np.all(lower.sum(axis=2) <= 1 + 1e-9)
    assert np.all(upper.sum(axis=2) >= 1 - 1e-9)
    outside = partition.outside
    np.testing.assert_array_equal(lower[outside, :, outside], 1.0)
    np.testing.assert_array_equal(upper[outside].sum(axis=1), 1.0)


def test_imdp_matches_transition_bounds(line_imdp, line_regressor):
    imdp, partition, noise = line_imdp
    lower, upper = imdp.dense()
    for q in (0, 3, 7):
        cell = partition.cell(q)
        for i, action in enumerate(imdp.actions):
            posts = [post(line_regressor, action, cell, c) for c in noise.boxes()]
            eps = sup_error_bound(line_regressor, action, cell, 0.01)
            for target in range(partition.n_cells):
                expected = transition_bounds(
                    posts, eps, 0.01, partition.cell(target), noise
                )
                assert lower[q, i, target] == pytest.approx(expected[0], abs=1e-12)
                assert upper[q, i, target] == pytest.approx(expected[1], abs=1e-12)
            expected = transition_bounds(
                posts, eps, 0.01, OUTSIDE, noise, domain=partition.domain
            )
            outside = partition.outside
            assert lower[q, i, outside] == pytest.approx(expected[0], abs=1e-12)
            assert upper[q, i, outside] == pytest.approx(expected[1], abs=1e-12)


def test_shift_mode_leaves_domain(line_imdp):
    imdp, partition, _ = line_imdp
    lower, upper = imdp.dense()
    # x + 0.25 from the last cell always exits [0, 1]
    assert upper[partition.n_cells - 1, 1, partition.outside] == pytest.approx(1.0)
    assert lower[partition.n_cells - 1, 1, : partition.n_cells].sum() == 0.0


def test_imdp_file(tmp_path, line_imdp):
    imdp, partition, _ = line_imdp
    path = write_imdp(tmp_path / "line.imdp", imdp)
    copy = read_imdp(path)
    assert copy.actions == imdp.actions
    assert copy.labels == imdp.labels
    assert copy.ap == imdp.ap
    assert copy.partition.counts == partition.counts
    for ours, theirs in zip(copy.dense(), imdp.dense()):
        np.testing.assert_array_equal(ours, theirs)
    np.testing.assert_array_equal(copy.table.floor, imdp.table.floor)

    other = tmp_path / "other.imdp"
    other.write_text("# format=something\nq,a\n")
    with pytest.raises(ValueError):
        read_imdp(other)
    with pytest.raises(FileNotFoundError):
        read_imdp(tmp_path / "missing.imdp")


def test_dense_imdp_feasibility():
    labels = [(), ("b",)]
    lower = np.zeros((2, 1, 2))
    upper = np.full((2, 1, 2), 0.4)
    with pytest.raises(RuntimeError):
        Imdp.from_dense(lower, upper, labels)
    upper[:] = 1.0
    imdp = Imdp.from_dense(lower, upper, labels)
    assert imdp.ap == ("b",)
    targets, lo, hi, floor = imdp.row(0, 0)
    np.testing.assert_array_equal(targets, [0, 1])
    assert floor == 0.0


def test_table_take_and_sums():
    lower = np.array([[0.2, 0.3, 0.0], [0.0, 0.5, 0.5]])
    upper = np.array([[0.5, 0.8, 0.0], [0.0, 0.5, 0.5]])
    table = IntervalTable.from_dense(lower, upper)
    taken = table.take(np.array([1, 0]))
    dense_lower, dense_upper = taken.dense()
    np.testing.assert_array_equal(dense_lower, lower[::-1])
    np.testing.assert_array_equal(dense_upper, upper[::-1])
    low_sums, high_sums = table.row_sums()
    np.testing.assert_allclose(low_sums, [0.5, 1.0])
    np.testing.assert_allclose(high_sums, [1.3, 1.0])


def test_listed_interval_narrower_than_default(tmp_path):
    table = IntervalTable(
        indptr=np.array([0, 2]),
        indices=np.array([0, 1]),
        lower=np.array([0.5, 0.2]),
        upper=np.array([0.55, 0.6]),
        floor=np.array([0.1]),
        n_targets=3,
    )
    with pytest.raises(RuntimeError, match="default upper bound"):
        table.check()

    widened = IntervalTable(
        indptr=table.indptr,
        indices=table.indices,
        lower=table.lower,
        upper=np.array([0.6, 0.6]),
        floor=table.floor,
        n_targets=3,
    )
    widened.check()
    imdp = Imdp(
        table=widened,
        actions=(0,),
        labels=(frozenset(),) * 3,
        ap=(),
    )
    # the same row read back from a hand-edited file is rejected
    path = write_imdp(tmp_path / "narrow.imdp", imdp)
    path.write_text(path.read_text().replace("0.59999999999999998", "0.55"))
    with pytest.raises(RuntimeError, match="default upper bound"):
        read_imdp(path)
