"""
Interval MDP abstraction of the learned dynamics.

Transition bounds follow from Post boxes of every (cell, action, noise cell)
triple, the regression error bound of the cell and the confidence ``delta``:
with ``keep = prod_i (1 - delta_i)``

- ``lower(q, a, q')`` is ``keep`` times the probability of noise cells whose
  Post, dilated by the error bound, lies inside ``q'``;
- ``upper(q, a, q')`` is ``(1 - keep) + keep`` times the probability of noise
  cells whose dilated Post meets ``q'``.

Only targets met by some dilated Post are stored; every other target has the
upper bound ``1 - keep`` (the row ``floor``) and lower bound 0.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .geometry import Box, NoiseCells, Partition, dilate, erode
from .gp import Regressor, check_confidence
from .reach import batch_post_bounds, batch_sup_error_bound
from .utils.utils import read_commented_csv, validate_file, write_commented_csv

logger = logging.getLogger(__name__)

IMDP_FORMAT = "gpshield-imdp"
IMDP_FORMAT_VERSION = 1
#: Sentinel target for ``q_u`` in :func:`transition_bounds`.
OUTSIDE = "q_u"
FEASIBILITY_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class IntervalTable:
    """
    Sparse interval rows in CSR layout.

    Row ``r`` lists targets ``indices[indptr[r]:indptr[r + 1]]`` with bounds
    ``lower``/``upper``; every unlisted target has bounds ``[0, floor[r]]``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    floor: np.ndarray
    n_targets: int

    @property
    def n_rows(self) -> int:
        return self.indptr.size - 1

    def row(self, r: int):
        span = slice(self.indptr[r], self.indptr[r + 1])
        return self.indices[span], self.lower[span], self.upper[span], self.floor[r]

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.indptr))

    def dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """Dense (rows, targets) lower and upper tables."""
        lower = np.zeros((self.n_rows, self.n_targets))
        upper = np.repeat(self.floor[:, None], self.n_targets, axis=1)
        rows = self.row_ids()
        lower[rows, self.indices] = self.lower
        upper[rows, self.indices] = self.upper
        return lower, upper

    def take(self, rows: np.ndarray) -> "IntervalTable":
        """Sub-table of the given rows, in the given order."""
        rows = np.asarray(rows, dtype=np.intp)
        counts = self.indptr[rows + 1] - self.indptr[rows]
        indptr = np.concatenate([[0], np.cumsum(counts)])
        gather = np.repeat(self.indptr[rows] - indptr[:-1], counts) + np.arange(
            indptr[-1]
        )
        return IntervalTable(
            indptr=indptr,
            indices=self.indices[gather],
            lower=self.lower[gather],
            upper=self.upper[gather],
            floor=self.floor[rows],
            n_targets=self.n_targets,
        )

    def row_sums(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sums of lower and upper bounds over all targets per row."""
        counts = np.diff(self.indptr)
        rows = self.row_ids()
        lower = np.bincount(rows, self.lower, minlength=self.n_rows)
        upper = np.bincount(rows, self.upper, minlength=self.n_rows)
        upper += self.floor * (self.n_targets - counts)
        return lower, upper

    def check(self, tolerance: float = FEASIBILITY_TOLERANCE) -> None:
        """
        Raises
        ------
        RuntimeError
            Invalid intervals, a listed interval narrower than the row default
            upper bound, or a row with ``sum lower > 1`` or ``sum upper < 1``.
        """
        if np.any(self.lower < -tolerance) or np.any(self.upper > 1 + tolerance):
            raise RuntimeError("Transition bounds outside [0, 1].")
        if np.any(self.lower > self.upper + tolerance):
            raise RuntimeError("Transition lower bound exceeds its upper bound.")
        if np.any(self.floor < 0) or np.any(self.floor > 1 + tolerance):
            raise RuntimeError("Default upper bounds outside [0, 1].")
        # a listed target can take at least what an unlisted one can
        slack = self.upper - self.lower - self.floor[self.row_ids()]
        if np.any(slack < -tolerance):
            r = self.row_ids()[np.argmin(slack)]
            message = (
                "Row {r} lists a target whose interval width is below the default "
                "upper bound {f:.17g} of unlisted targets.".format(r=r, f=self.floor[r])
            )
            raise RuntimeError(message)
        lower, upper = self.row_sums()
        bad = np.flatnonzero((lower > 1 + tolerance) | (upper < 1 - tolerance))
        if bad.size:
            message = (
                "{n} infeasible transition rows, first row {r}: sum lower {lo:.17g}, "
                "sum upper {hi:.17g}.".format(
                    n=bad.size, r=bad[0], lo=lower[bad[0]], hi=upper[bad[0]]
                )
            )
            raise RuntimeError(message)

    @classmethod
    def from_dense(cls, lower, upper) -> "IntervalTable":
        """Table listing every target with a positive upper bound; floor 0."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        rows, cols = np.nonzero((upper > 0) | (lower > 0))
        indptr = np.concatenate(
            [[0], np.cumsum(np.bincount(rows, minlength=lower.shape[0]))]
        )
        return cls(
            indptr=indptr,
            indices=cols,
            lower=lower[rows, cols],
            upper=upper[rows, cols],
            floor=np.zeros(lower.shape[0]),
            n_targets=lower.shape[1],
        )


@dataclass(frozen=True, eq=False)
class Imdp:
    """
    Interval MDP over partition states.

    Row ``q * n_actions + i`` of :attr:`table` holds the bounds of state ``q``
    under ``actions[i]``.
    """

    table: IntervalTable
    actions: Tuple[int, ...]
    labels: Tuple[frozenset, ...]
    ap: Tuple[str, ...]
    partition: Optional[Partition] = None

    @property
    def n_states(self) -> int:
        return self.table.n_targets

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def row(self, state: int, action_index: int):
        return self.table.row(state * self.n_actions + action_index)

    def dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper bounds as (states, actions, states) arrays."""
        lower, upper = self.table.dense()
        shape = (self.n_states, self.n_actions, self.n_states)
        return lower.reshape(shape), upper.reshape(shape)

    @classmethod
    def from_dense(cls, lower, upper, labels, actions=None, ap=None) -> "Imdp":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n_states, n_actions, _ = lower.shape
        labels = tuple(frozenset(label) for label in labels)
        if ap is None:
            ap = tuple(sorted(set().union(*labels)))
        table = IntervalTable.from_dense(
            lower.reshape(n_states * n_actions, n_states),
            upper.reshape(n_states * n_actions, n_states),
        )
        table.check()
        return cls(
            table=table,
            actions=tuple(range(n_actions)) if actions is None else tuple(actions),
            labels=labels,
            ap=tuple(ap),
        )


def _keep_factor(delta, dim: int) -> float:
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (dim,))
    if np.any(delta < 0) or np.any(delta >= 1):
        raise ValueError("delta must lie in [0, 1), got {d}.".format(d=delta))
    return float(np.prod(1.0 - delta))


def transition_bounds(
    posts: Sequence[Box],
    eps,
    delta,
    target: Union[Box, str],
    noise: NoiseCells,
    domain: Optional[Box] = None,
) -> Tuple[float, float]:
    """
    Lower and upper probability of moving into *target*.

    Parameters
    ----------
    posts : Sequence[Box]
        Post box per noise cell.
    eps : array_like
        Nonnegative error bound of the source region per dimension.
    delta : float or array_like
        Confidence in [0, 1), scalar (shared) or per dimension.
    target : Box or str
        Target cell, or :data:`OUTSIDE` for ``q_u``.
    noise : NoiseCells
        Noise cells with their probabilities.
    domain : Box, optional
        The domain; required when *target* is ``q_u``.

    Returns
    -------
    Tuple[float, float]
        ``(lower, upper)``.
    """
    if len(posts) != len(noise):
        raise ValueError(
            "Expected one Post per noise cell ({n}), got {k}.".format(
                n=len(noise), k=len(posts)
            )
        )
    eps = np.asarray(eps, dtype=float)
    keep = _keep_factor(delta, eps.size)
    lower = upper = 0.0
    for post, probability in zip(posts, noise.probabilities):
        if isinstance(target, str):
            if target != OUTSIDE or domain is None:
                raise ValueError("The outer target needs OUTSIDE and the domain.")
            # eroding q_u is dilating the domain and vice versa
            inside = not post.intersects(dilate(domain, eps))
            avoids = post.is_subset(erode(domain, eps))
        else:
            inside = post.is_subset(erode(target, eps))
            avoids = not post.intersects(dilate(target, eps))
        lower += probability * keep * inside
        upper += probability * (1.0 - keep * avoids)
    return float(lower), float(upper)


def _action_rows(
    reg: Regressor,
    action: int,
    partition: Partition,
    noise: NoiseCells,
    delta,
    keep: float,
    mean_method: str,
    error_method: str,
    subdivisions: int,
):
    cell_lower, cell_upper = partition.cell_bounds()
    mlo, mhi = batch_post_bounds(
        reg, action, cell_lower, cell_upper, mean_method, subdivisions
    )
    eps = batch_sup_error_bound(
        reg, action, cell_lower, cell_upper, delta, error_method, subdivisions
    )
    n_cells = partition.n_cells
    outside = partition.outside
    floor = 1.0 - keep
    domain = partition.domain
    rows = []
    for q in range(n_cells):
        # Post dilated by the error bound, one box per noise cell
        dlo = mlo[q] + noise.lower - eps[q]
        dhi = mhi[q] + noise.upper + eps[q]
        contained = partition.containing_cell(dlo, dhi)
        first, last = partition.index_ranges(dlo, dhi)
        exits = ~(
            np.all(dlo >= domain.lower, axis=1) & np.all(dhi <= domain.upper, axis=1)
        )
        disjoint = np.any(dhi < domain.lower, axis=1) | np.any(
            dlo > domain.upper, axis=1
        )

        targets, hit_mass, in_mass = [], [], []
        for c, probability in enumerate(noise.probabilities):
            lo_idx = np.maximum(first[c], 0)
            hi_idx = np.minimum(last[c], np.asarray(partition.counts) - 1)
            if np.all(lo_idx <= hi_idx):
                axes = [np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)]
                grid = np.meshgrid(*axes, indexing="ij")
                cells = np.ravel_multi_index(
                    tuple(g.ravel() for g in grid), partition.counts
                )
                targets.append(cells)
                hit_mass.append(np.full(cells.size, probability))
                in_mass.append(
                    np.where(cells == contained[c], probability, 0.0)
                )
            if exits[c]:
                targets.append(np.array([outside]))
                hit_mass.append(np.array([probability]))
                in_mass.append(np.array([probability if disjoint[c] else 0.0]))
        targets = np.concatenate(targets)
        unique, inverse = np.unique(targets, return_inverse=True)
        hit = np.bincount(inverse, np.concatenate(hit_mass), minlength=unique.size)
        inside = np.bincount(inverse, np.concatenate(in_mass), minlength=unique.size)
        upper = np.minimum(floor + keep * hit, 1.0)
        rows.append((unique, np.minimum(keep * inside, upper), upper, floor))
    return rows


def build_imdp(
    reg: Regressor,
    partition: Partition,
    noise: NoiseCells,
    delta,
    mean_method: str = "interval",
    error_method: str = "interval",
    subdivisions: int = 1,
    n_jobs: int = 1,
) -> Imdp:
    """
    Assemble the IMDP abstraction.

    Parameters
    ----------
    reg : Regressor
        Fitted regressor.
    partition : Partition
        State partition.
    noise : NoiseCells
        Noise support partition.
    delta : float or array_like
        Confidence in (0, 1), scalar or per dimension.
    mean_method : str, optional
        Mean enclosure, "interval" or "taylor".
    error_method : str, optional
        Quadratic form bound for the error, "interval" or "centered".
    subdivisions : int, optional
        Pieces per dimension each cell is split into for bounding.
    n_jobs : int, optional
        Parallel workers over actions.

    Returns
    -------
    Imdp
        The abstraction; ``q_u`` is absorbing under every action.

    Raises
    ------
    RuntimeError
        A row violates feasibility (geometry bug).
    """
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (reg.dim,))
    delta = check_confidence(delta)
    if partition.dim != reg.dim:
        raise ValueError(
            "Partition dimension {p} does not match the regressor "
            "dimension {r}.".format(p=partition.dim, r=reg.dim)
        )
    keep = _keep_factor(delta, reg.dim)
    actions = reg.actions
    per_action = Parallel(n_jobs=n_jobs)(
        delayed(_action_rows)(
            reg,
            action,
            partition,
            noise,
            delta,
            keep,
            mean_method,
            error_method,
            subdivisions,
        )
        for action in actions
    )

    outside = partition.outside
    indices, lower, upper, floor, counts = [], [], [], [], []
    for q in range(partition.n_states):
        for i in range(len(actions)):
            if q == outside:
                row = (np.array([outside]), np.ones(1), np.ones(1), 0.0)
            else:
                row = per_action[i][q]
            indices.append(row[0])
            lower.append(row[1])
            upper.append(row[2])
            floor.append(row[3])
            counts.append(row[0].size)
    table = IntervalTable(
        indptr=np.concatenate([[0], np.cumsum(counts)]),
        indices=np.concatenate(indices).astype(np.intp),
        lower=np.concatenate(lower),
        upper=np.concatenate(upper),
        floor=np.asarray(floor, dtype=float),
        n_targets=partition.n_states,
    )
    table.check()
    logger.info(
        "Built IMDP with %d states, %d actions and %d listed transitions",
        partition.n_states,
        len(actions),
        table.indices.size,
    )
    return Imdp(
        table=table,
        actions=actions,
        labels=partition.labels,
        ap=partition.ap,
        partition=partition,
    )


def write_imdp(path: Union[str, Path], imdp: Imdp) -> Path:
    """
    Write an IMDP as sparse ``(q, a, q_next, lower, upper)`` records.

    Records are ordered by state, action and target; ``q_next = -1`` records
    carry the default upper bound of unlisted targets.
    """
    table = imdp.table
    n_actions = imdp.n_actions
    rows = table.row_ids()
    frame = pd.DataFrame(
        {
            "q": rows // n_actions,
            "a": np.asarray(imdp.actions)[rows % n_actions],
            "q_next": table.indices,
            "lower": table.lower,
            "upper": table.upper,
        }
    )
    floors = np.flatnonzero(table.floor > 0)
    floor_frame = pd.DataFrame(
        {
            "q": floors // n_actions,
            "a": np.asarray(imdp.actions)[floors % n_actions],
            "q_next": -1,
            "lower": 0.0,
            "upper": table.floor[floors],
        }
    )
    frame = pd.concat([frame, floor_frame], ignore_index=True)
    frame = frame.sort_values(["q", "a", "q_next"], kind="mergesort")
    header = {
        "format": IMDP_FORMAT,
        "version": IMDP_FORMAT_VERSION,
        "states": imdp.n_states,
        "actions": json.dumps(list(imdp.actions)),
        "ap": json.dumps(list(imdp.ap)),
        "labels": json.dumps([sorted(label) for label in imdp.labels]),
        "partition": json.dumps(imdp.partition.to_dict())
        if imdp.partition is not None
        else "null",
    }
    return write_commented_csv(path, header, frame)


def read_imdp(path: Union[str, Path]) -> Imdp:
    """Read an IMDP written by :func:`write_imdp`."""
    header, frame = read_commented_csv(validate_file(path, "IMDP"))
    if header.get("format") != IMDP_FORMAT:
        raise ValueError("{path} is not an IMDP file.".format(path=path))
    if int(header.get("version", -1)) != IMDP_FORMAT_VERSION:
        raise ValueError(
            "Unsupported IMDP format version {v}.".format(v=header.get("version"))
        )
    n_states = int(header["states"])
    actions = tuple(json.loads(header["actions"]))
    action_index = {a: i for i, a in enumerate(actions)}
    n_rows = n_states * len(actions)
    rows = frame["q"].to_numpy(dtype=np.intp) * len(actions) + np.array(
        [action_index[a] for a in frame["a"].tolist()], dtype=np.intp
    )
    targets = frame["q_next"].to_numpy(dtype=np.intp)
    is_floor = targets < 0
    floor = np.zeros(n_rows)
    floor[rows[is_floor]] = frame["upper"].to_numpy(dtype=float)[is_floor]

    listed = ~is_floor
    order = np.lexsort((targets[listed], rows[listed]))
    rows_l = rows[listed][order]
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows_l, minlength=n_rows))])
    table = IntervalTable(
        indptr=indptr,
        indices=targets[listed][order],
        lower=frame["lower"].to_numpy(dtype=float)[listed][order],
        upper=frame["upper"].to_numpy(dtype=float)[listed][order],
        floor=floor,
        n_targets=n_states,
    )
    table.check()
    partition = json.loads(header.get("partition", "null"))
    return Imdp(
        table=table,
        actions=actions,
        labels=tuple(frozenset(label) for label in json.loads(header["labels"])),
        ap=tuple(json.loads(header["ap"])),
        partition=Partition.from_dict(partition) if partition else None,
    )
