import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ..geometry import (
    EMPTY,
    Box,
    Partition,
    Region,
    build_partition,
    dilate,
    erode,
    partition_noise,
    split_bounds,
)

coordinate = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
margin = st.floats(min_value=0.0, max_value=2.0, allow_nan=False)


@st.composite
def boxes(draw, dim=2):
    a = np.array([draw(coordinate) for _ in range(dim)])
    b = np.array([draw(coordinate) for _ in range(dim)])
    return Box(np.minimum(a, b), np.maximum(a, b))


def test_box_rejects_inverted_corners():
    with pytest.raises(ValueError):
        Box([1.0, 0.0], [0.0, 1.0])


def test_box_basics():
    box = Box([0.0, -1.0], [2.0, 1.0])
    assert box.dim == 2
    assert box.volume() == pytest.approx(4.0)
    np.testing.assert_allclose(box.center, [1.0, 0.0])
    np.testing.assert_allclose(box.radius, [1.0, 1.0])
    assert box.contains([[0.0, 0.0], [2.0, 1.0], [2.1, 0.0]]).tolist() == [
        True,
        True,
        False,
    ]
    assert Box.point([0.5, 0.5]).volume() == 0.0
    assert Box.from_dict(box.to_dict()) == box


def test_intersection_and_hull():
    a = Box([0.0, 0.0], [1.0, 1.0])
    b = Box([0.5, 0.5], [2.0, 2.0])
    assert a.intersection(b) == Box([0.5, 0.5], [1.0, 1.0])
    assert a.hull(b) == Box([0.0, 0.0], [2.0, 2.0])
    far = Box([3.0, 3.0], [4.0, 4.0])
    assert not a.intersects(far)
    assert a.intersection(far) is EMPTY
    assert EMPTY.hull(a) == a
    assert EMPTY.is_subset(a)
    assert not EMPTY.intersects(a)


def test_erode_dilate_examples():
    unit = Box([0.0, 0.0], [1.0, 1.0])
    assert erode(unit, (0.0, 0.0)) == unit
    assert erode(unit, (0.6, 0.1)) is EMPTY
    grown = dilate(unit, (0.1, 0.2))
    np.testing.assert_allclose(grown.lower, [-0.1, -0.2])
    np.testing.assert_allclose(grown.upper, [1.1, 1.2])
    assert erode(EMPTY, 0.1) is EMPTY
    with pytest.raises(ValueError):
        dilate(unit, (-0.1, 0.0))


@settings(deadline=None, max_examples=200)
@given(boxes(), margin, margin)
def test_erode_inside_dilate(box, e0, e1):
    eps = np.array([e0, e1])
    grown = dilate(box, eps)
    assert box.is_subset(grown)
    shrunk = erode(box, eps)
    assert shrunk.is_subset(box)
    # growing the eroded box never leaves the original
    if not shrunk.is_empty:
        assert dilate(shrunk, eps).is_subset(Box(box.lower - 1e-12, box.upper + 1e-12))


def test_split_covers_box():
    lower, upper = split_bounds([0.0, 0.0], [1.0, 2.0], (2, 4))
    assert lower.shape == (8, 2)
    assert np.sum(np.prod(upper - lower, axis=1)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        split_bounds([0.0], [1.0], 0)


def test_partition_counts():
    partition = build_partition(Box([-2.0, -2.0], [2.0, 2.0]), (4, 4))
    assert partition.n_cells == 16
    assert partition.n_states == 17
    assert partition.outside == 16
    assert partition.label_of(partition.outside) == frozenset({"b"})
    assert partition.ap == ("b",)


def test_partition_region_labels(square_partition):
    labelled = [q for q in range(16) if "g" in square_partition.label_of(q)]
    assert len(labelled) == 1
    assert square_partition.cell(labelled[0]) == Box([0.0, 0.0], [1.0, 1.0])
    masks = square_partition.label_masks()
    assert masks["g"].sum() == 1
    assert masks["b"].tolist() == [False] * 16 + [True]


def test_partition_rejects_misaligned_region():
    domain = Box([-2.0, -2.0], [2.0, 2.0])
    with pytest.raises(ValueError, match="does not align"):
        build_partition(domain, (4, 4), [("g", Box([0.0, 0.0], [0.5, 0.5]))])
    with pytest.raises(ValueError, match="not inside"):
        build_partition(domain, (4, 4), [("g", Box([1.0, 1.0], [3.0, 3.0]))])


def test_locate_conventions(square_partition):
    states = square_partition.locate(
        [[-2.0, -2.0], [2.0, 2.0], [-1.0, -2.0], [2.5, 0.0], [0.5, 0.5]]
    )
    assert states[0] == 0
    assert states[1] == 15
    # lower-closed cells: x = -1 belongs to the second column
    assert square_partition.cell(int(states[2])).lower[0] == -1.0
    assert states[3] == square_partition.outside
    assert "g" in square_partition.label_of(int(states[4]))


def test_cells_tile_domain(square_partition):
    lower, upper = square_partition.cell_bounds()
    assert np.sum(np.prod(upper - lower, axis=1)) == pytest.approx(16.0)
    centers = 0.5 * (lower + upper)
    np.testing.assert_array_equal(square_partition.locate(centers), np.arange(16))


def test_containing_cell(square_partition):
    inside = square_partition.containing_cell([[0.1, 0.1]], [[0.9, 0.9]])
    assert inside[0] == square_partition.locate([0.5, 0.5])
    across = square_partition.containing_cell([[0.5, 0.5]], [[1.5, 0.9]])
    assert across[0] == -1


def test_partition_round_trip(square_partition):
    copy = Partition.from_dict(square_partition.to_dict())
    assert copy.counts == square_partition.counts
    assert copy.labels == square_partition.labels
    assert Region.from_dict(square_partition.regions[0].to_dict()) == (
        square_partition.regions[0]
    )


def test_partition_noise():
    single = partition_noise(0.01, (1, 1))
    assert len(single) == 1
    assert single.probabilities[0] == pytest.approx(1.0)
    assert single.boxes()[0] == Box([-0.01, -0.01], [0.01, 0.01])

    quarters = partition_noise(0.01, (2, 2))
    assert len(quarters) == 4
    np.testing.assert_allclose(quarters.probabilities, 0.25)

    point = partition_noise(0.0, 3, dim=2)
    assert len(point) == 1
    with pytest.raises(ValueError):
        partition_noise(-1.0, 1, dim=1)
