"""
Product of the IMDP with the violation DFA and synthesis of the maximally
permissive shield.

Product transitions advance the automaton on the label of the source state:
from ``(q, z)`` every successor is ``(q', delta(z, L(q)))``. Product states
whose automaton state accepts are absorbing.
"""

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .abstraction import FEASIBILITY_TOLERANCE, Imdp, IntervalTable
from .geometry import Partition
from .ltl import Dfa
from .utils.utils import read_commented_csv, validate_file, write_commented_csv

logger = logging.getLogger(__name__)

SHIELD_FORMAT = "gpshield-shield"
SHIELD_FORMAT_VERSION = 1
DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_SWEEPS = 1_000_000
#: Slack allowed when asserting that values do not decrease between resets.
MONOTONICITY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ProductImdp:
    """
    Interval MDP over product states ``(q, z)``.

    Attributes
    ----------
    states : np.ndarray
        ``(q, z)`` per product state, shape (N, 2), ordered by q then z.
    index : np.ndarray
        Product index of ``(q, z)`` at ``index[z, q]``, -1 when unreachable.
    table : IntervalTable
        Row ``s * n_actions + i`` holds the bounds of state ``s`` under
        ``actions[i]``. Every target of a row shares the automaton state
        ``group[row]``; unlisted targets of that group are bounded by the row
        floor.
    group : np.ndarray
        Target automaton state per row.
    accepting : np.ndarray
        Final product states, shape (N,).
    actions : Tuple[int, ...]
        Action ids.
    initial : np.ndarray
        Product index of ``(q, z0)`` for every IMDP state q.
    """

    states: np.ndarray
    index: np.ndarray
    table: IntervalTable
    group: np.ndarray
    accepting: np.ndarray
    actions: Tuple[int, ...]
    initial: np.ndarray

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @classmethod
    def from_dense(cls, lower, upper, accepting, actions=None) -> "ProductImdp":
        """
        Product given directly by dense (N, A, N) bound tables.

        Accepting states are made absorbing; all states share one automaton
        state so ``states[:, 1]`` is 0.
        """
        lower = np.array(lower, dtype=float)
        upper = np.array(upper, dtype=float)
        accepting = np.asarray(accepting, dtype=bool)
        n_states, n_actions, _ = lower.shape
        for s in np.flatnonzero(accepting):
            lower[s] = 0.0
            upper[s] = 0.0
            lower[s, :, s] = 1.0
            upper[s, :, s] = 1.0
        table = IntervalTable.from_dense(
            lower.reshape(n_states * n_actions, n_states),
            upper.reshape(n_states * n_actions, n_states),
        )
        table.check()
        states = np.stack([np.arange(n_states), np.zeros(n_states, dtype=int)], axis=1)
        return cls(
            states=states,
            index=np.arange(n_states)[None, :],
            table=table,
            group=np.zeros(n_states * n_actions, dtype=np.intp),
            accepting=accepting,
            actions=tuple(range(n_actions)) if actions is None else tuple(actions),
            initial=np.arange(n_states),
        )


def _reachable(imdp: Imdp, dfa: Dfa, letters: np.ndarray) -> np.ndarray:
    n_q = imdp.n_states
    n_a = imdp.n_actions
    table = imdp.table
    rows = table.row_ids()
    sources = rows // n_a
    successors = [[] for _ in range(n_q)]
    order = np.argsort(sources, kind="stable")
    split = np.searchsorted(sources[order], np.arange(n_q + 1))
    targets = table.indices[order]
    for q in range(n_q):
        successors[q] = np.unique(targets[split[q] : split[q + 1]])
    has_floor = (table.floor.reshape(n_q, n_a) > 0).any(axis=1)

    reach = np.zeros((dfa.n_states, n_q), dtype=bool)
    reach[dfa.initial] = True
    frontier = reach.copy()
    while frontier.any():
        found = np.zeros_like(reach)
        for z in np.flatnonzero(frontier.any(axis=1)):
            if dfa.accepting[z]:
                continue
            qs = np.flatnonzero(frontier[z])
            for letter in np.unique(letters[qs]):
                group = qs[letters[qs] == letter]
                z_next = dfa.transitions[z, letter]
                if has_floor[group].any():
                    found[z_next] = True
                else:
                    found[z_next, np.concatenate([successors[q] for q in group])] = True
        frontier = found & ~reach
        reach |= found
    return reach


def build_product(imdp: Imdp, dfa: Dfa) -> ProductImdp:
    """
    Product of an IMDP with a violation DFA, restricted to states reachable
    from ``(q, z0)``.

    Parameters
    ----------
    imdp : Imdp
        Abstraction.
    dfa : Dfa
        Automaton over ``2^AP`` of the IMDP labels.

    Returns
    -------
    ProductImdp
        The product.

    Raises
    ------
    ValueError
        The automaton alphabet differs from the IMDP propositions.
    """
    if set(dfa.ap) != set(imdp.ap):
        message = "DFA propositions {d} differ from the IMDP propositions {i}.".format(
            d=sorted(dfa.ap), i=sorted(imdp.ap)
        )
        raise ValueError(message)
    letters = np.array([dfa.letter(label) for label in imdp.labels], dtype=np.intp)
    reach = _reachable(imdp, dfa, letters)
    q_ids, z_ids = np.nonzero(reach.T)
    states = np.stack([q_ids, z_ids], axis=1)
    n_states = states.shape[0]
    index = np.full(reach.shape, -1, dtype=np.intp)
    index[z_ids, q_ids] = np.arange(n_states)
    accepting = dfa.accepting[z_ids]

    n_a = imdp.n_actions
    imdp_rows = (q_ids[:, None] * n_a + np.arange(n_a)).ravel()
    taken = imdp.table.take(imdp_rows)
    z_next = np.where(accepting, z_ids, dfa.transitions[z_ids, letters[q_ids]])
    row_group = np.repeat(z_next, n_a)
    row_accepting = np.repeat(accepting, n_a)

    entry_rows = taken.row_ids()
    keep = ~row_accepting[entry_rows]
    columns = index[row_group[entry_rows[keep]], taken.indices[keep]]
    if np.any(columns < 0):
        raise RuntimeError("Product transition targets an unreachable state.")
    loop_rows = np.flatnonzero(row_accepting)
    all_rows = np.concatenate([entry_rows[keep], loop_rows])
    all_columns = np.concatenate([columns, loop_rows // n_a])
    order = np.lexsort((all_columns, all_rows))
    ones = np.ones(loop_rows.size)
    table = IntervalTable(
        indptr=np.concatenate(
            [[0], np.cumsum(np.bincount(all_rows, minlength=n_states * n_a))]
        ),
        indices=all_columns[order],
        lower=np.concatenate([taken.lower[keep], ones])[order],
        upper=np.concatenate([taken.upper[keep], ones])[order],
        floor=np.where(row_accepting, 0.0, taken.floor),
        n_targets=n_states,
    )
    table.check()
    logger.info(
        "Built product with %d states (%d final) from %d IMDP and %d DFA states",
        n_states,
        int(accepting.sum()),
        imdp.n_states,
        dfa.n_states,
    )
    return ProductImdp(
        states=states,
        index=index,
        table=table,
        group=row_group,
        accepting=accepting,
        actions=imdp.actions,
        initial=index[dfa.initial],
    )


def omax_adversary(lower, upper, values) -> np.ndarray:
    """
    Feasible distribution maximizing the expected value of *values*.

    Targets are filled up to their upper bounds in order of decreasing value
    (ties by index) after every target received its lower bound; exactly one
    pivot target receives the remaining mass.

    Raises
    ------
    RuntimeError
        Infeasible row.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    values = np.asarray(values, dtype=float)
    if (
        np.any(lower > upper + FEASIBILITY_TOLERANCE)
        or lower.sum() > 1 + FEASIBILITY_TOLERANCE
        or upper.sum() < 1 - FEASIBILITY_TOLERANCE
    ):
        raise RuntimeError("Infeasible interval row.")
    distribution = lower.copy()
    remaining = 1.0 - lower.sum()
    for target in np.argsort(-values, kind="stable"):
        if remaining <= 0:
            break
        added = min(upper[target] - lower[target], remaining)
        distribution[target] += added
        remaining -= added
    return distribution


def q_values(prod: ProductImdp, values: np.ndarray) -> np.ndarray:
    """
    Worst-case expected successor value of every (state, action) pair.

    Parameters
    ----------
    prod : ProductImdp
        Product.
    values : np.ndarray
        Value per product state.

    Returns
    -------
    np.ndarray
        Shape (N, A).

    Raises
    ------
    RuntimeError
        Infeasible row.
    """
    table = prod.table
    n_states = prod.n_states
    n_rows = table.n_rows
    indptr = table.indptr
    counts = np.diff(indptr)
    nonempty = counts > 0

    # targets of one group sorted by decreasing value, ties by index
    state_group = prod.states[:, 1]
    n_groups = int(state_group.max()) + 1 if n_states else 0
    order = np.lexsort((np.arange(n_states), -values, state_group))
    group_start = np.searchsorted(state_group[order], np.arange(n_groups))
    group_size = np.bincount(state_group, minlength=n_groups)
    rank = np.empty(n_states, dtype=np.intp)
    rank[order] = np.arange(n_states) - group_start[state_group[order]]
    sorted_values = values[order]
    prefix = np.concatenate([[0.0], np.cumsum(sorted_values)])

    rows = table.row_ids()
    position = rank[table.indices]
    perm = np.argsort(rows.astype(np.int64) * (n_states + 1) + position, kind="stable")
    position = position[perm]
    lower = table.lower[perm]
    upper = table.upper[perm]
    target_values = values[table.indices[perm]]

    floor = table.floor
    size = group_size[prod.group]
    start = group_start[prod.group]
    base = np.bincount(rows, lower * target_values, minlength=n_rows)
    remaining = 1.0 - np.bincount(rows, lower, minlength=n_rows)
    excess = (upper - lower) - floor[rows]

    def row_cumsum(x):
        total = np.cumsum(x)
        before = np.concatenate([[0.0], total])[indptr[:-1]]
        return total - before[rows]

    cum_excess = row_cumsum(excess)
    cum_weighted = row_cumsum(excess * target_values)
    last_entry = indptr[1:] - 1
    total_excess = np.zeros(n_rows)
    total_excess[nonempty] = cum_excess[last_entry[nonempty]]
    capacity = floor * size + total_excess
    infeasible = capacity < remaining - FEASIBILITY_TOLERANCE
    if np.any(infeasible):
        r = np.flatnonzero(infeasible)[0]
        message = "Infeasible product row {r}: capacity {c:.17g} < remaining {m:.17g}."
        message = message.format(r=r, c=capacity[r], m=remaining[r])
        raise RuntimeError(message)

    def candidate(seg_start, seg_end, filled, f, need):
        # first t in [seg_start, seg_end] with f * (t + 1) + filled >= need
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(
                f > 0,
                np.maximum(seg_start, np.ceil((need - filled) / f - 1.0 - 1e-9)),
                seg_start,
            )
        valid = np.where(f > 0, t <= seg_end, filled >= need - 1e-12)
        valid &= seg_start <= seg_end
        return np.where(valid, t, 0).astype(np.intp), valid

    # segment before the first listed target
    first_position = np.full(n_rows, 0, dtype=np.intp)
    if rows.size:
        first_position[nonempty] = position[indptr[:-1][nonempty]]
    first_position = np.where(nonempty, first_position, size)
    t0, valid0 = candidate(np.zeros(n_rows), first_position - 1, 0.0, floor, remaining)

    # segment starting at each listed target
    is_last = np.zeros(rows.size, dtype=bool)
    is_last[last_entry[nonempty]] = True
    next_position = np.empty_like(position)
    next_position[:-1] = position[1:]
    seg_end = np.where(is_last, size[rows] - 1, next_position - 1)
    te, valid_e = candidate(position, seg_end, cum_excess, floor[rows], remaining[rows])

    pivot = np.where(valid0, t0, size - 1)
    filled = np.zeros(n_rows)
    weighted = np.zeros(n_rows)
    chosen_rows = np.zeros(n_rows, dtype=bool)
    chosen_rows[valid0] = True

    candidates = np.flatnonzero(valid_e & ~valid0[rows])
    picked_rows, first = np.unique(rows[candidates], return_index=True)
    entries = candidates[first]
    is_first = np.zeros(rows.size, dtype=bool)
    is_first[indptr[:-1][nonempty]] = True
    previous_excess = np.where(is_first, 0.0, np.roll(cum_excess, 1))
    previous_weighted = np.where(is_first, 0.0, np.roll(cum_weighted, 1))
    at_target = te[entries] == position[entries]
    pivot[picked_rows] = te[entries]
    filled[picked_rows] = np.where(
        at_target, previous_excess[entries], cum_excess[entries]
    )
    weighted[picked_rows] = np.where(
        at_target, previous_weighted[entries], cum_weighted[entries]
    )
    chosen_rows[picked_rows] = True

    # rounding left no pivot: every capacity is used
    unresolved = ~chosen_rows
    q = np.empty(n_rows)
    full = floor * (prefix[start + size] - prefix[start])
    full_weighted = np.zeros(n_rows)
    full_weighted[nonempty] = cum_weighted[last_entry[nonempty]]
    q[unresolved] = base[unresolved] + full[unresolved] + full_weighted[unresolved]

    resolved = chosen_rows
    t = pivot[resolved]
    g_start = start[resolved]
    partial = prefix[g_start + t] - prefix[g_start]
    used = floor[resolved] * t + filled[resolved]
    q[resolved] = (
        base[resolved]
        + floor[resolved] * partial
        + weighted[resolved]
        + (remaining[resolved] - used) * sorted_values[g_start + t]
    )
    return q.reshape(n_states, prod.n_actions)


@dataclass(frozen=True, eq=False)
class Shield:
    """
    Allowed actions and worst-case violation values per product state.

    Attributes
    ----------
    states : np.ndarray
        ``(q, z)`` per product state.
    index : np.ndarray
        Product index at ``index[z, q]``, -1 when absent.
    allowed : np.ndarray
        Boolean (N, A) table of allowed actions, never empty per row.
    values : np.ndarray
        Worst-case violation probability per product state.
    fallback : np.ndarray
        States whose every action reached the threshold and which retain
        their safest action only.
    actions : Tuple[int, ...]
        Action ids.
    p : float
        Violation threshold.
    tol : float
        Convergence tolerance.
    sweeps, resets : int
        Value iteration sweeps and restarts after shield changes.
    spec : str
        Formula text the shield enforces.
    ap : Tuple[str, ...]
        Atomic propositions of the automaton alphabet.
    dfa_initial : int
        Initial automaton state.
    partition : dict, optional
        Serialized partition of the abstraction.
    """

    states: np.ndarray
    index: np.ndarray
    allowed: np.ndarray
    values: np.ndarray
    fallback: np.ndarray
    actions: Tuple[int, ...]
    p: float
    tol: float
    sweeps: int = 0
    resets: int = 0
    spec: str = ""
    ap: Tuple[str, ...] = ()
    dfa_initial: int = 0
    partition: Optional[dict] = None

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def safe(self) -> np.ndarray:
        return self.values < self.p

    def lookup(self, q, z) -> np.ndarray:
        """Product indices of (q, z) pairs, -1 for pairs outside the shield."""
        q = np.asarray(q)
        z = np.asarray(z)
        n_z, n_q = self.index.shape
        inside = (z >= 0) & (z < n_z) & (q >= 0) & (q < n_q)
        result = np.full(np.broadcast(q, z).shape, -1, dtype=np.intp)
        result[inside] = self.index[z[inside], q[inside]]
        return result

    def allowed_actions(self, q: int, z: int) -> Tuple[int, ...]:
        """Allowed action ids at ``(q, z)``; every action when it is unknown."""
        i = int(self.lookup(q, z))
        if i < 0:
            warnings.warn(
                "Product state ({q}, {z}) is not in the shield; allowing every "
                "action.".format(q=q, z=z)
            )
            return self.actions
        return tuple(a for a, ok in zip(self.actions, self.allowed[i]) if ok)

    def get_partition(self) -> Optional[Partition]:
        if self.partition is None:
            return None
        return Partition.from_dict(self.partition)


def _group_members(prod: ProductImdp) -> Tuple[list, np.ndarray]:
    """Product states per automaton state and their position within it."""
    group_of = prod.states[:, 1]
    n_groups = int(max(group_of.max(initial=-1), prod.group.max(initial=-1))) + 1
    members = [np.flatnonzero(group_of == g) for g in range(n_groups)]
    local = np.empty(prod.n_states, dtype=np.intp)
    for ids in members:
        local[ids] = np.arange(ids.size)
    return members, local


def _row_value(prod, row, values, members, local) -> float:
    """Worst-case successor value of one product row under *values*."""
    table = prod.table
    span = slice(table.indptr[row], table.indptr[row + 1])
    group = members[prod.group[row]]
    targets = local[table.indices[span]]
    lower = np.zeros(group.size)
    lower[targets] = table.lower[span]
    capacity = np.full(group.size, table.floor[row])
    capacity[targets] = np.maximum(table.upper[span] - table.lower[span], 0.0)
    group_values = values[group]
    # decreasing value, ties by product index
    order = np.lexsort((group, -group_values))
    remaining = max(1.0 - lower.sum(), 0.0)
    filled = np.minimum(np.cumsum(capacity[order]), remaining)
    added = np.diff(filled, prepend=0.0)
    return float(lower @ group_values + added @ group_values[order])


def _sweep(prod, values, allowed, members, local) -> float:
    """
    One in-place sweep over the product states in index order; each update
    already sees the values updated earlier in the sweep. Returns the largest
    change.
    """
    n_actions = prod.n_actions
    change = 0.0
    for s in np.flatnonzero(~prod.accepting):
        rows = s * n_actions + np.flatnonzero(allowed[s])
        best = max(_row_value(prod, r, values, members, local) for r in rows)
        if best < values[s] - MONOTONICITY_SLACK:
            raise RuntimeError("Value iteration decreased between resets.")
        change = max(change, abs(best - values[s]))
        values[s] = best
    return change


def synthesize(
    prod: ProductImdp,
    p: float,
    tol: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    spec: str = "",
    ap: Tuple[str, ...] = (),
    dfa_initial: int = 0,
    partition: Optional[Partition] = None,
) -> Shield:
    """
    Maximally permissive shield for the violation threshold *p*.

    Starting from the indicator of the final states, every sweep first
    computes the worst-case Q-values of all allowed actions against the
    values of the previous sweep and removes the actions whose value reached
    *p*. A state left without actions gets back the least valued one of its
    previous set. Any change of the allowed sets restarts value iteration from
    the indicator; otherwise the values are updated in place, state by state
    in index order, to the best remaining action. Iteration stops when the
    largest change of a sweep drops below *tol* without a removal.

    Parameters
    ----------
    prod : ProductImdp
        Product IMDP.
    p : float
        Violation threshold in (0, 1].
    tol : float, optional
        Convergence tolerance, by default 1e-6.
    max_sweeps : int, optional
        Sweep budget, by default 10^6.
    spec, ap, dfa_initial, partition : optional
        Provenance stored in the shield.

    Returns
    -------
    Shield
        The shield.

    Raises
    ------
    ValueError
        Invalid threshold or tolerance.
    RuntimeError
        Sweep budget exceeded or decreasing values.
    """
    if not 0 < p <= 1:
        raise ValueError("Threshold p must lie in (0, 1], got {p}.".format(p=p))
    if not tol > 0:
        raise ValueError("Tolerance must be > 0, got {t}.".format(t=tol))
    members, local = _group_members(prod)
    initial_values = prod.accepting.astype(float)
    allowed = np.ones((prod.n_states, prod.n_actions), dtype=bool)
    fallback = np.zeros(prod.n_states, dtype=bool)
    values = initial_values.copy()
    sweeps = resets = 0
    while True:
        sweeps += 1
        if sweeps > max_sweeps:
            message = (
                "Shield synthesis exceeded {n} sweeps; the tolerance {tol:g} may be "
                "too small.".format(n=max_sweeps, tol=tol)
            )
            raise RuntimeError(message)
        q = q_values(prod, values)

        kept = allowed & (q < p)
        emptied = np.flatnonzero(~kept.any(axis=1))
        if emptied.size:
            # least valued action of the previous set, lowest index on ties
            restricted = np.where(allowed[emptied], q[emptied], np.inf)
            kept[emptied, np.argmin(restricted, axis=1)] = True
            fallback[emptied] = True
        if np.any(kept != allowed):
            resets += 1
            logger.debug(
                "Sweep %d removed %d actions, %d states fell back",
                sweeps,
                int((allowed & ~kept).sum()),
                emptied.size,
            )
            allowed = kept
            values = initial_values.copy()
            continue

        if _sweep(prod, values, allowed, members, local) < tol:
            break

    shield = Shield(
        states=prod.states,
        index=prod.index,
        allowed=allowed,
        values=values,
        fallback=fallback,
        actions=prod.actions,
        p=float(p),
        tol=float(tol),
        sweeps=sweeps,
        resets=resets,
        spec=spec,
        ap=tuple(ap),
        dfa_initial=int(dfa_initial),
        partition=partition.to_dict() if partition is not None else None,
    )
    logger.info(
        "Synthesized shield in %d sweeps with %d resets: %d of %d product states safe",
        sweeps,
        resets,
        int(shield.safe.sum()),
        prod.n_states,
    )
    return shield


def safe_states(
    shield: Shield, p: Optional[float] = None
) -> FrozenSet[Tuple[int, int]]:
    """Product states ``(q, z)`` whose value is strictly below *p*."""
    p = shield.p if p is None else p
    if not 0 < p <= 1:
        raise ValueError("Threshold p must lie in (0, 1], got {p}.".format(p=p))
    return frozenset(
        (int(q), int(z)) for q, z in shield.states[shield.values < p]
    )


def _restricted_max(q: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    return np.where(allowed, q, -np.inf).max(axis=1)


def robust_reachability(
    prod: ProductImdp,
    allowed: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> np.ndarray:
    """
    Worst-case probability of reaching the final states when the policy
    maximizes over the allowed actions (all by default).

    Plain synchronous value iteration: every sweep reads only the values of
    the previous one.
    """
    if allowed is None:
        allowed = np.ones((prod.n_states, prod.n_actions), dtype=bool)
    values = prod.accepting.astype(float)
    for _ in range(max_sweeps):
        updated = _restricted_max(q_values(prod, values), allowed)
        change = np.max(np.abs(updated - values)) if values.size else 0.0
        values = updated
        if change < tol:
            return values
    raise RuntimeError(
        "Interval value iteration exceeded {n} sweeps.".format(n=max_sweeps)
    )


def write_shield(path: Union[str, Path], shield: Shield) -> Path:
    """Write a shield as one record per product state in stable order."""
    actions = np.asarray(shield.actions)
    allowed = [";".join(str(a) for a in actions[row]) for row in shield.allowed]
    frame = pd.DataFrame(
        {
            "q": shield.states[:, 0],
            "z": shield.states[:, 1],
            "allowed": allowed,
            "value": shield.values,
            "fallback": shield.fallback.astype(int),
        }
    )
    header = {
        "format": SHIELD_FORMAT,
        "version": SHIELD_FORMAT_VERSION,
        "p": repr(shield.p),
        "tol": repr(shield.tol),
        "spec": shield.spec,
        "ap": json.dumps(list(shield.ap)),
        "actions": json.dumps([int(a) for a in shield.actions]),
        "dfa_states": shield.index.shape[0],
        "imdp_states": shield.index.shape[1],
        "dfa_initial": shield.dfa_initial,
        "sweeps": shield.sweeps,
        "resets": shield.resets,
        "partition": json.dumps(shield.partition),
    }
    return write_commented_csv(path, header, frame)


def read_shield(path: Union[str, Path]) -> Shield:
    """Read a shield written by :func:`write_shield`."""
    header, frame = read_commented_csv(validate_file(path, "shield"))
    if header.get("format") != SHIELD_FORMAT:
        raise ValueError("{path} is not a shield file.".format(path=path))
    if int(header.get("version", -1)) != SHIELD_FORMAT_VERSION:
        raise ValueError(
            "Unsupported shield format version {v}.".format(v=header.get("version"))
        )
    actions = tuple(json.loads(header["actions"]))
    position = {a: i for i, a in enumerate(actions)}
    states = frame[["q", "z"]].to_numpy(dtype=np.intp)
    allowed = np.zeros((states.shape[0], len(actions)), dtype=bool)
    for i, text in enumerate(frame["allowed"].astype(str).tolist()):
        for token in filter(None, text.split(";")):
            allowed[i, position[int(token)]] = True
    index = np.full(
        (int(header["dfa_states"]), int(header["imdp_states"])), -1, dtype=np.intp
    )
    index[states[:, 1], states[:, 0]] = np.arange(states.shape[0])
    return Shield(
        states=states,
        index=index,
        allowed=allowed,
        values=frame["value"].to_numpy(dtype=float),
        fallback=frame["fallback"].to_numpy(dtype=int).astype(bool),
        actions=actions,
        p=float(header["p"]),
        tol=float(header["tol"]),
        sweeps=int(header.get("sweeps", 0)),
        resets=int(header.get("resets", 0)),
        spec=header.get("spec", ""),
        ap=tuple(json.loads(header.get("ap", "[]"))),
        dfa_initial=int(header.get("dfa_initial", 0)),
        partition=json.loads(header.get("partition", "null")),
    )
