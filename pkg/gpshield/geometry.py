"""
Axis-aligned boxes, labelled grid partitions of the domain and noise-support
partitions.

The partition numbers its grid cells row-major (last dimension fastest) and
appends the outer state ``q_u`` (the complement of the domain) as the last
index, so IMDP state indices are stable across runs.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

#: Relative tolerance used to decide whether a region face lies on a grid plane.
GRID_TOLERANCE: float = 1e-9


class Box:
    """
    Closed axis-aligned box ``[lower, upper]``.

    Parameters
    ----------
    lower : array_like
        Lower corner.
    upper : array_like
        Upper corner.

    Raises
    ------
    ValueError
        Corners of different shape or ``lower > upper`` in some dimension.
    """

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper) -> None:
        lower = np.array(lower, dtype=float, ndmin=1)
        upper = np.array(upper, dtype=float, ndmin=1)
        if lower.shape != upper.shape or lower.ndim != 1:
            message = "Box corners must be vectors of equal length, got {lo} and {hi}."
            message = message.format(lo=lower.shape, hi=upper.shape)
            raise ValueError(message)
        if np.any(lower > upper):
            message = "Box lower corner {lo} exceeds upper corner {hi}.".format(
                lo=lower, hi=upper
            )
            raise ValueError(message)
        lower.flags.writeable = False
        upper.flags.writeable = False
        self.lower = lower
        self.upper = upper

    @classmethod
    def point(cls, x) -> "Box":
        return cls(x, x)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_empty(self) -> bool:
        return False

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, points) -> np.ndarray:
        """
        Test closed membership of one or several points.

        Parameters
        ----------
        points : array_like
            A point of shape (n,) or points of shape (k, n).

        Returns
        -------
        np.ndarray
            Boolean scalar array or boolean vector of length k.
        """
        points = np.asarray(points, dtype=float)
        inside = (points >= self.lower) & (points <= self.upper)
        return np.all(inside, axis=-1)

    def intersects(self, other: "Box") -> bool:
        if other.is_empty:
            return False
        return bool(
            np.all(self.lower <= other.upper) and np.all(other.lower <= self.upper)
        )

    def is_subset(self, other: "Box") -> bool:
        if other.is_empty:
            return False
        return bool(
            np.all(other.lower <= self.lower) and np.all(self.upper <= other.upper)
        )

    def intersection(self, other: "Box") -> "Box":
        if not self.intersects(other):
            return EMPTY
        return Box(
            np.maximum(self.lower, other.lower), np.minimum(self.upper, other.upper)
        )

    def hull(self, other: "Box") -> "Box":
        if other.is_empty:
            return self
        return Box(
            np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper)
        )

    def split(self, counts) -> List["Box"]:
        """
        Split the box into a uniform grid of sub-boxes (row-major order).

        Parameters
        ----------
        counts : int or Sequence[int]
            Number of pieces per dimension.

        Returns
        -------
        List[Box]
            The sub-boxes.
        """
        lower, upper = split_bounds(self.lower, self.upper, counts)
        return [Box(lo, hi) for lo, hi in zip(lower, upper)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box) or other.is_empty:
            return False
        return bool(
            np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self) -> int:
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self) -> str:
        return "Box(lower={lo}, upper={hi})".format(
            lo=self.lower.tolist(), hi=self.upper.tolist()
        )

    def to_dict(self) -> Dict[str, List[float]]:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[float]]) -> "Box":
        return cls(data["lower"], data["upper"])


class _EmptyBox:
    """The empty set; intersects nothing and is a subset of everything."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    @property
    def is_empty(self) -> bool:
        return True

    def volume(self) -> float:
        return 0.0

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.zeros(points.shape[:-1], dtype=bool)

    def intersects(self, other) -> bool:
        return False

    def is_subset(self, other) -> bool:
        return True

    def intersection(self, other) -> "_EmptyBox":
        return self

    def hull(self, other):
        return other

    def __repr__(self) -> str:
        return "EMPTY"

    def __reduce__(self):
        return (_EmptyBox, ())


#: Sentinel for the empty box.
EMPTY = _EmptyBox()

BoxLike = Union[Box, _EmptyBox]


def split_bounds(lower, upper, counts) -> Tuple[np.ndarray, np.ndarray]:
    """
    Corners of a uniform sub-grid of one box, row-major.

    Parameters
    ----------
    lower, upper : array_like
        Box corners, shape (n,).
    counts : int or Sequence[int]
        Pieces per dimension.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Lower and upper corners, each of shape (prod(counts), n).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    counts = np.broadcast_to(np.asarray(counts, dtype=int), lower.shape)
    if np.any(counts < 1):
        raise ValueError("Subdivision counts must be >= 1, got {c}.".format(c=counts))
    edges = [np.linspace(lo, hi, c + 1) for lo, hi, c in zip(lower, upper, counts)]
    index = np.indices(tuple(counts)).reshape(lower.size, -1).T
    sub_lower = np.stack([edges[d][index[:, d]] for d in range(lower.size)], axis=1)
    sub_upper = np.stack([edges[d][index[:, d] + 1] for d in range(lower.size)], axis=1)
    return sub_lower, sub_upper


def erode(box: BoxLike, eps) -> BoxLike:
    """
    Shrink every face of a box inward.

    Parameters
    ----------
    box : Box
        Box to shrink (``EMPTY`` stays empty).
    eps : array_like
        Nonnegative per-dimension margins.

    Returns
    -------
    Box
        The eroded box, or ``EMPTY`` when some width collapses.
    """
    eps = _check_margin(eps)
    if box.is_empty:
        return EMPTY
    lower = box.lower + eps
    upper = box.upper - eps
    if np.any(lower > upper):
        return EMPTY
    return Box(lower, upper)


def dilate(box: BoxLike, eps) -> BoxLike:
    """
    Grow every face of a box outward by the nonnegative margins *eps*.
    """
    eps = _check_margin(eps)
    if box.is_empty:
        return EMPTY
    return Box(box.lower - eps, box.upper + eps)


def _check_margin(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0) or not np.all(np.isfinite(eps)):
        message = "Erosion/dilation margins must be finite and >= 0, got {eps}.".format(
            eps=eps
        )
        raise ValueError(message)
    return eps


@dataclass(frozen=True)
class Region:
    """A labelled box of interest."""

    label: str
    box: Box

    def to_dict(self) -> dict:
        return {"label": self.label, **self.box.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Region":
        return cls(str(data["label"]), Box(data["lower"], data["upper"]))


@dataclass(frozen=True, eq=False)
class Partition:
    """
    Uniform grid over the domain plus the outer state ``q_u``.

    Use :func:`build_partition` to construct instances.
    """

    domain: Box
    counts: Tuple[int, ...]
    regions: Tuple[Region, ...]
    outside_label: str
    edges: Tuple[np.ndarray, ...] = field(repr=False)
    labels: Tuple[FrozenSet[str], ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def n_states(self) -> int:
        return self.n_cells + 1

    @property
    def outside(self) -> int:
        """Index of ``q_u``."""
        return self.n_cells

    @property
    def ap(self) -> Tuple[str, ...]:
        """Sorted atomic propositions used by any state label."""
        names = {self.outside_label} if self.outside_label else set()
        for region in self.regions:
            names.add(region.label)
        return tuple(sorted(names))

    def cell_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of all grid cells, shape (n_cells, n)."""
        index = np.indices(self.counts).reshape(self.dim, -1).T
        lower = np.stack([self.edges[d][index[:, d]] for d in range(self.dim)], axis=1)
        upper = np.stack(
            [self.edges[d][index[:, d] + 1] for d in range(self.dim)], axis=1
        )
        return lower, upper

    def cell(self, index: int) -> Box:
        if not 0 <= index < self.n_cells:
            raise ValueError(
                "Cell index {i} out of range [0, {n}).".format(i=index, n=self.n_cells)
            )
        multi = np.unravel_index(index, self.counts)
        lower = [self.edges[d][multi[d]] for d in range(self.dim)]
        upper = [self.edges[d][multi[d] + 1] for d in range(self.dim)]
        return Box(lower, upper)

    def label_of(self, index: int) -> FrozenSet[str]:
        return self.labels[index]

    def label_masks(self) -> Dict[str, np.ndarray]:
        """Per atomic proposition, a boolean vector over all states."""
        return {
            name: np.array([name in label for label in self.labels], dtype=bool)
            for name in self.ap
        }

    def locate(self, points) -> np.ndarray:
        """
        Map points to state indices.

        Cells are lower-closed and upper-open per dimension, except the last
        cell which also contains the upper domain face. Points outside the
        domain map to ``q_u``.

        Parameters
        ----------
        points : array_like
            Points of shape (n,) or (k, n).

        Returns
        -------
        np.ndarray
            Integer state indices of shape () or (k,).
        """
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        multi = np.empty(points.shape, dtype=np.intp)
        for d in range(self.dim):
            idx = np.searchsorted(self.edges[d], points[:, d], side="right") - 1
            multi[:, d] = np.clip(idx, 0, self.counts[d] - 1)
        cells = np.ravel_multi_index(tuple(multi.T), self.counts)
        inside = self.domain.contains(points)
        states = np.where(inside, cells, self.outside)
        return states[0] if single else states

    def index_ranges(self, lower, upper) -> Tuple[np.ndarray, np.ndarray]:
        """
        Per dimension, the range of cell indices whose closed cells meet a box.

        Parameters
        ----------
        lower, upper : np.ndarray
            Box corners of shape (k, n).

        Returns
        -------
        Tuple[np.ndarray, np.ndarray]
            First and last intersecting index per box and dimension, shape
            (k, n). Empty in some dimension when first > last.
        """
        first = np.empty(lower.shape, dtype=np.intp)
        last = np.empty(lower.shape, dtype=np.intp)
        for d in range(self.dim):
            edges = self.edges[d]
            first[:, d] = np.searchsorted(edges[1:], lower[:, d], side="left")
            last[:, d] = np.searchsorted(edges[:-1], upper[:, d], side="right") - 1
        return first, last

    def containing_cell(self, lower, upper) -> np.ndarray:
        """
        Index of the unique cell containing each box, or -1.

        A box lying on a shared face is attributed to the cell that owns its
        lower corner under :meth:`locate`'s convention.
        """
        lower = np.atleast_2d(lower)
        upper = np.atleast_2d(upper)
        multi = np.empty(lower.shape, dtype=np.intp)
        ok = np.ones(lower.shape[0], dtype=bool)
        for d in range(self.dim):
            edges = self.edges[d]
            idx = np.clip(
                np.searchsorted(edges, lower[:, d], side="right") - 1,
                0,
                self.counts[d] - 1,
            )
            multi[:, d] = idx
            ok &= (lower[:, d] >= edges[idx]) & (upper[:, d] <= edges[idx + 1])
        cells = np.ravel_multi_index(tuple(multi.T), self.counts)
        return np.where(ok, cells, -1)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "counts": list(self.counts),
            "regions": [region.to_dict() for region in self.regions],
            "outside_label": self.outside_label,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Partition":
        return build_partition(
            Box.from_dict(data["domain"]),
            data["counts"],
            [Region.from_dict(region) for region in data.get("regions", [])],
            outside_label=data.get("outside_label", "b"),
        )


def _snap(edges: np.ndarray, value: float, scale: float) -> int:
    hits = np.flatnonzero(np.abs(edges - value) <= GRID_TOLERANCE * scale)
    if hits.size == 0:
        return -1
    return int(hits[0])


def build_partition(
    domain: Box,
    counts: Union[int, Sequence[int]],
    regions: Iterable = (),
    outside_label: str = "b",
) -> Partition:
    """
    Build a uniform grid partition respecting labelled regions.

    Parameters
    ----------
    domain : Box
        The domain ``X``.
    counts : int or Sequence[int]
        Cells per dimension.
    regions : Iterable[Region or Tuple[str, Box]], optional
        Labelled boxes; every face must lie on a grid plane.
    outside_label : str, optional
        Label of ``q_u``, by default "b".

    Returns
    -------
    Partition
        The partition.

    Raises
    ------
    ValueError
        Invalid counts, a region outside the domain or a region face that is
        not a grid plane.
    """
    counts = tuple(int(c) for c in np.broadcast_to(np.asarray(counts), (domain.dim,)))
    if any(c < 1 for c in counts):
        raise ValueError("Cell counts must be >= 1, got {c}.".format(c=counts))
    edges = tuple(
        np.linspace(domain.lower[d], domain.upper[d], counts[d] + 1)
        for d in range(domain.dim)
    )
    for e in edges:
        e.flags.writeable = False

    parsed = []
    for region in regions:
        if not isinstance(region, Region):
            label, box = region
            region = Region(str(label), box)
        if not region.box.is_subset(domain):
            message = "Region '{label}' {box} is not inside the domain {d}.".format(
                label=region.label, box=region.box, d=domain
            )
            raise ValueError(message)
        lower_index, upper_index = [], []
        for d in range(domain.dim):
            scale = max(domain.upper[d] - domain.lower[d], 1.0)
            lo = _snap(edges[d], region.box.lower[d], scale)
            hi = _snap(edges[d], region.box.upper[d], scale)
            if lo < 0 or hi < 0:
                message = (
                    "Region '{label}' {box} does not align with the {n}-cell grid "
                    "in dimension {d}; choose a compatible resolution.".format(
                        label=region.label, box=region.box, n=counts[d], d=d
                    )
                )
                raise ValueError(message)
            lower_index.append(lo)
            upper_index.append(hi)
        parsed.append((region, lower_index, upper_index))

    labels: List[set] = [set() for _ in range(int(np.prod(counts)))]
    index = np.indices(counts).reshape(domain.dim, -1).T
    for region, lower_index, upper_index in parsed:
        inside = np.all(
            (index >= np.asarray(lower_index)) & (index < np.asarray(upper_index)),
            axis=1,
        )
        for cell in np.flatnonzero(inside):
            labels[cell].add(region.label)
    frozen = tuple(frozenset(label) for label in labels)
    frozen += (frozenset([outside_label]) if outside_label else frozenset(),)

    partition = Partition(
        domain=domain,
        counts=counts,
        regions=tuple(region for region, _, _ in parsed),
        outside_label=outside_label,
        edges=edges,
        labels=frozen,
    )
    logger.debug(
        "Partition with %d cells over %s, %d regions",
        partition.n_cells,
        domain,
        len(parsed),
    )
    return partition


@dataclass(frozen=True, eq=False)
class NoiseCells:
    """
    Partition of the noise support ``[-sigma_v, sigma_v]^n`` with cell
    probabilities.
    """

    lower: np.ndarray
    upper: np.ndarray
    probabilities: np.ndarray

    def __len__(self) -> int:
        return self.probabilities.size

    def boxes(self) -> List[Box]:
        return [Box(lo, hi) for lo, hi in zip(self.lower, self.upper)]


def partition_noise(
    noise_bound: float, counts: Union[int, Sequence[int]], dim: int = None
) -> NoiseCells:
    """
    Uniform grid over the noise support with uniform-density probabilities.

    Parameters
    ----------
    noise_bound : float
        Half width ``sigma_v`` of the support; 0 gives a single point cell.
    counts : int or Sequence[int]
        Cells per dimension.
    dim : int, optional
        State dimension, required when *counts* is a scalar.

    Returns
    -------
    NoiseCells
        Cells with ``P(c) = vol(c) / (2 sigma_v)^n``.
    """
    if noise_bound < 0:
        raise ValueError(
            "Noise bound must be >= 0, got {s}.".format(s=noise_bound)
        )
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    if dim is not None:
        counts = np.broadcast_to(counts, (dim,))
    if np.any(counts < 1):
        raise ValueError("Noise cell counts must be >= 1, got {c}.".format(c=counts))
    n = counts.size
    if noise_bound == 0:
        zero = np.zeros((1, n))
        return NoiseCells(zero, zero.copy(), np.ones(1))
    support = np.full(n, float(noise_bound))
    lower, upper = split_bounds(-support, support, counts)
    probabilities = np.prod((upper - lower) / (2.0 * support), axis=1)
    return NoiseCells(lower, upper, probabilities)
