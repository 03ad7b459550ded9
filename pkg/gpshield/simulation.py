"""
Shielded Monte Carlo simulation and statistical validation of IMDP bounds.

The shield is post-posed: an agent proposes a mode, the shield replaces it by
a uniformly random allowed mode when the proposal is not allowed at the
current product state, then the automaton reads the label of the current cell
and the system takes one noisy step.
"""

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .abstraction import Imdp
from .geometry import Partition
from .ltl import Dfa
from .shield import Shield
from .systems import SystemModel
from .utils.utils import create_output_path

logger = logging.getLogger(__name__)

#: Agent called as ``agent(states, cells, rng)`` returning one mode per state.
Agent = Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]

MIN_SAMPLES_PER_PAIR = 100
WINDOW_SIGMAS = 3.0


@dataclass
class RunReport:
    """
    Aggregated outcome of a simulation.

    Attributes
    ----------
    trajectories : int
        Number of simulated trajectories.
    steps : int
        Steps per trajectory.
    violations : int
        Trajectories whose automaton reached an accepting state.
    survival : np.ndarray
        Per trajectory, the step of the violation or ``steps`` without one.
    interventions : np.ndarray
        Per step, the number of proposals the shield replaced.
    region_visits : Dict[str, np.ndarray]
        Per label, the number of entries into labelled cells per trajectory.
    shielded : bool
        Whether the shield was active.
    cells, dfa_states, actions : np.ndarray, optional
        Recorded traces when requested, shapes (k, steps), (k, steps + 1)
        and (k, steps).
    """

    trajectories: int
    steps: int
    violations: int
    survival: np.ndarray
    interventions: np.ndarray
    region_visits: Dict[str, np.ndarray] = field(default_factory=dict)
    shielded: bool = True
    cells: Optional[np.ndarray] = None
    dfa_states: Optional[np.ndarray] = None
    actions: Optional[np.ndarray] = None

    @property
    def violation_rate(self) -> float:
        return self.violations / self.trajectories if self.trajectories else 0.0

    def survival_histogram(self, bins: int = 20) -> Tuple[np.ndarray, np.ndarray]:
        """Counts and bin edges of the violating trajectories' survival times."""
        violated = self.survival[self.survival < self.steps]
        return np.histogram(violated, bins=bins, range=(0, self.steps))

    def to_frame(self) -> pd.DataFrame:
        """One row per trajectory."""
        frame = pd.DataFrame(
            {
                "trajectory": np.arange(self.trajectories),
                "violated": self.survival < self.steps,
                "survival": self.survival,
            }
        )
        for label in sorted(self.region_visits):
            frame["visits_{label}".format(label=label)] = self.region_visits[label]
        return frame

    def summary(self) -> str:
        lines = [
            "shielded: {s}".format(s=self.shielded),
            "trajectories: {n}".format(n=self.trajectories),
            "steps: {n}".format(n=self.steps),
            "violations: {n}".format(n=self.violations),
            "violation_rate: {r:.6g}".format(r=self.violation_rate),
            "interventions: {n}".format(n=int(self.interventions.sum())),
        ]
        for label in sorted(self.region_visits):
            visits = self.region_visits[label]
            lines.append(
                "visits_{label}: mean {m:.4g}, max {x}".format(
                    label=label,
                    m=visits.mean() if visits.size else 0.0,
                    x=int(visits.max()) if visits.size else 0,
                )
            )
        return "\n".join(lines) + "\n"


def write_report(
    destination: Union[str, Path],
    report: RunReport,
    histogram: Optional[Union[str, Path]] = None,
    gnuplot: Optional[Union[str, Path]] = None,
    bins: int = 20,
) -> Path:
    """
    Write the report summary and, optionally, the survival histogram as CSV
    and the per-step interventions as whitespace separated columns.
    """
    destination = create_output_path(destination)
    destination.write_text(report.summary())
    counts, edges = report.survival_histogram(bins)
    if histogram is not None:
        frame = pd.DataFrame(
            {"bin_start": edges[:-1], "bin_end": edges[1:], "count": counts}
        )
        frame.to_csv(create_output_path(histogram), index=False, lineterminator="\n")
    if gnuplot is not None:
        columns = pd.DataFrame(
            {"step": np.arange(report.steps), "interventions": report.interventions}
        )
        path = create_output_path(gnuplot)
        with open(path, "w") as fid:
            fid.write("# step interventions\n")
            columns.to_csv(fid, sep=" ", header=False, index=False, lineterminator="\n")
    return destination


def random_agent(n_actions: int) -> Agent:
    """Agent proposing uniformly random mode indices."""

    def agent(states, cells, rng):
        return rng.integers(n_actions, size=states.shape[0])

    return agent


def _safe_cells(partition: Partition, dfa: Dfa, shield: Shield) -> np.ndarray:
    cells = np.arange(partition.n_cells)
    index = shield.lookup(cells, np.full(cells.size, dfa.initial))
    safe = np.zeros(cells.size, dtype=bool)
    present = index >= 0
    safe[present] = shield.values[index[present]] < shield.p
    return cells[safe]


def _sample_in_cells(partition, cells, size, rng) -> np.ndarray:
    lower, upper = partition.cell_bounds()
    picked = cells[rng.integers(cells.size, size=size)]
    return rng.uniform(lower[picked], upper[picked])


def _simulate_batch(
    system: SystemModel,
    partition: Partition,
    dfa: Dfa,
    shield: Shield,
    steps: int,
    size: int,
    rng: np.random.Generator,
    start_cells: Optional[np.ndarray],
    initial_states: Optional[np.ndarray],
    agent: Agent,
    unshielded: bool,
    record: bool,
):
    n_actions = len(system.actions)
    action_ids = np.asarray(system.actions)
    if initial_states is not None:
        x = np.array(initial_states[:size], dtype=float)
    elif start_cells is not None:
        x = _sample_in_cells(partition, start_cells, size, rng)
    else:
        domain = system.domain
        x = rng.uniform(domain.lower, domain.upper, size=(size, system.dim))

    letters = np.array(
        [dfa.letter(partition.label_of(q)) for q in range(partition.n_states)],
        dtype=np.intp,
    )
    masks = partition.label_masks()
    z = np.full(size, dfa.initial, dtype=np.intp)
    outside = np.zeros(size, dtype=bool)
    violated = np.zeros(size, dtype=bool)
    survival = np.full(size, steps, dtype=np.intp)
    interventions = np.zeros(steps, dtype=np.intp)
    visits = {label: np.zeros(size, dtype=np.intp) for label in masks}
    previous = {label: np.zeros(size, dtype=bool) for label in masks}
    missing = 0
    if record:
        cells_trace = np.empty((size, steps), dtype=np.intp)
        dfa_trace = np.empty((size, steps + 1), dtype=np.intp)
        action_trace = np.empty((size, steps), dtype=np.intp)
        dfa_trace[:, 0] = z

    rows = np.arange(size)
    for t in range(steps):
        q = partition.locate(x)
        outside |= q == partition.outside
        q = np.where(outside, partition.outside, q)
        for label, mask in masks.items():
            now = mask[q]
            visits[label] += now & ~previous[label]
            previous[label] = now

        proposed = np.asarray(agent(x, q, rng), dtype=np.intp)
        chosen = proposed
        if not unshielded:
            index = shield.lookup(q, z)
            known = index >= 0
            missing += int(np.count_nonzero(~known))
            allowed = np.ones((size, n_actions), dtype=bool)
            allowed[known] = shield.allowed[index[known]]
            blocked = ~allowed[rows, proposed]
            # uniform choice among the allowed modes
            scores = np.where(allowed, rng.random((size, n_actions)), -1.0)
            chosen = np.where(blocked, np.argmax(scores, axis=1), proposed)
            interventions[t] = np.count_nonzero(blocked & ~violated)

        z = dfa.transitions[z, letters[q]]
        newly = dfa.accepting[z] & ~violated
        survival[newly] = t
        violated |= newly
        if record:
            cells_trace[:, t] = q
            dfa_trace[:, t + 1] = z
            action_trace[:, t] = action_ids[chosen]
        x = system.step(x, action_ids[chosen], rng)

    result = {
        "survival": survival,
        "interventions": interventions,
        "visits": visits,
        "missing": missing,
    }
    if record:
        result.update(cells=cells_trace, dfa_states=dfa_trace, actions=action_trace)
    return result


def simulate_shielded(
    system: SystemModel,
    partition: Partition,
    dfa: Dfa,
    shield: Shield,
    steps: int = 1000,
    trajectories: int = 10000,
    seed: int = 0,
    agent: Union[str, Agent] = "random",
    unshielded: bool = False,
    require_safe_start: bool = False,
    initial_states=None,
    batch_size: int = 1000,
    n_jobs: int = 1,
    record: bool = False,
) -> RunReport:
    """
    Simulate the closed loop of agent, shield and system.

    Parameters
    ----------
    system : SystemModel
        Simulated system.
    partition : Partition
        Partition the shield was built on.
    dfa : Dfa
        Violation automaton of the enforced formula.
    shield : Shield
        Shield over the product of the abstraction and *dfa*.
    steps : int, optional
        Steps per trajectory, by default 1000.
    trajectories : int, optional
        Number of trajectories, by default 10000.
    seed : int, optional
        Master seed, by default 0.
    agent : str or callable, optional
        "random" for a uniformly random agent, or a callable
        ``agent(states, cells, rng)`` returning mode indices.
    unshielded : bool, optional
        Bypass the shield.
    require_safe_start : bool, optional
        Reject initial states outside the safe set.
    initial_states : array_like, optional
        Explicit initial states of shape (trajectories, n); by default states
        are uniform over the cells of the safe set.
    batch_size : int, optional
        Trajectories per independent generator, by default 1000.
    n_jobs : int, optional
        Parallel batches, by default 1.
    record : bool, optional
        Keep the cell, automaton state and mode traces.

    Returns
    -------
    RunReport
        Aggregated results.

    Raises
    ------
    ValueError
        Mismatched modes, invalid counts or, with *require_safe_start*, an
        initial state outside the safe set.
    """
    if steps < 1 or trajectories < 1 or batch_size < 1:
        raise ValueError("steps, trajectories and batch_size must be >= 1.")
    if tuple(shield.actions) != tuple(system.actions):
        message = "Shield modes {s} differ from the system modes {m}.".format(
            s=shield.actions, m=system.actions
        )
        raise ValueError(message)
    if agent == "random":
        agent = random_agent(len(system.actions))
    elif not callable(agent):
        raise ValueError("Unknown agent {a!r}.".format(a=agent))

    start_cells = None
    if initial_states is not None:
        initial_states = np.atleast_2d(np.asarray(initial_states, dtype=float))
        initial_states = np.resize(initial_states, (trajectories, system.dim))
        if require_safe_start:
            cells = partition.locate(initial_states)
            index = shield.lookup(cells, np.full(cells.size, dfa.initial))
            safe = (index >= 0) & (shield.values[np.maximum(index, 0)] < shield.p)
            if not np.all(safe):
                raise ValueError(
                    "{n} initial states lie outside the safe set.".format(
                        n=int(np.count_nonzero(~safe))
                    )
                )
    else:
        start_cells = _safe_cells(partition, dfa, shield)
        if start_cells.size == 0:
            if require_safe_start:
                raise ValueError("The safe set is empty.")
            warnings.warn("The safe set is empty; starting uniformly over the domain.")
            start_cells = None

    sizes = [batch_size] * (trajectories // batch_size)
    if trajectories % batch_size:
        sizes.append(trajectories % batch_size)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    generators = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(seed).spawn(len(sizes))
    ]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_simulate_batch)(
            system,
            partition,
            dfa,
            shield,
            steps,
            size,
            rng,
            start_cells,
            (
                None
                if initial_states is None
                else initial_states[offsets[i] : offsets[i + 1]]
            ),
            agent,
            unshielded,
            record,
        )
        for i, (size, rng) in enumerate(zip(sizes, generators))
    )

    survival = np.concatenate([r["survival"] for r in results])
    missing = sum(r["missing"] for r in results)
    if missing:
        warnings.warn(
            "{n} shield lookups hit product states outside the shield; every mode "
            "was allowed there.".format(n=missing)
        )
    report = RunReport(
        trajectories=trajectories,
        steps=steps,
        violations=int(np.count_nonzero(survival < steps)),
        survival=survival,
        interventions=np.sum([r["interventions"] for r in results], axis=0),
        region_visits={
            label: np.concatenate([r["visits"][label] for r in results])
            for label in results[0]["visits"]
        },
        shielded=not unshielded,
    )
    if record:
        report.cells = np.concatenate([r["cells"] for r in results])
        report.dfa_states = np.concatenate([r["dfa_states"] for r in results])
        report.actions = np.concatenate([r["actions"] for r in results])
    logger.info(
        "Simulated %d %s trajectories of %d steps: %d violations",
        trajectories,
        "shielded" if report.shielded else "unshielded",
        steps,
        report.violations,
    )
    return report


def validate_containment(
    system: SystemModel,
    imdp: Imdp,
    partition: Partition,
    samples_per_pair: int = 10000,
    seed: int = 0,
    pairs: Optional[Iterable[Tuple[int, int]]] = None,
) -> Tuple[pd.DataFrame, float]:
    """
    Compare empirical one-step frequencies with the IMDP bounds.

    For every (state, mode) pair, states are sampled uniformly in the cell and
    stepped once. The frequency ``f`` of each successor state is checked
    against ``[lower - 3 se, upper + 3 se]`` with ``se = sqrt(f (1 - f) / N)``.
    Successors listed in the IMDP row and successors observed are checked.

    Parameters
    ----------
    system : SystemModel
        The true system.
    imdp : Imdp
        Abstraction over *partition*.
    partition : Partition
        State partition.
    samples_per_pair : int, optional
        Samples per pair, >= 100, by default 10000.
    seed : int, optional
        Seed, by default 0.
    pairs : iterable of (int, int), optional
        (state index, mode id) pairs to test, by default all.

    Returns
    -------
    frame : pd.DataFrame
        One row per checked triple.
    fraction : float
        Fraction of triples within their window.
    """
    if samples_per_pair < MIN_SAMPLES_PER_PAIR:
        raise ValueError(
            "samples_per_pair must be >= {m}, got {n}.".format(
                m=MIN_SAMPLES_PER_PAIR, n=samples_per_pair
            )
        )
    if pairs is None:
        pairs = [(q, a) for q in range(partition.n_states) for a in imdp.actions]
    position = {a: i for i, a in enumerate(imdp.actions)}
    rng = np.random.default_rng(seed)
    lower_corners, upper_corners = partition.cell_bounds()
    records = []
    n = samples_per_pair
    for q, action in pairs:
        if q == partition.outside:
            destinations = np.full(n, partition.outside)
        else:
            x = rng.uniform(lower_corners[q], upper_corners[q], size=(n, system.dim))
            destinations = partition.locate(system.step(x, np.full(n, action), rng))
        counts = np.bincount(destinations, minlength=partition.n_states)
        targets, lower, upper, floor = imdp.row(q, position[action])
        lower_all = np.zeros(partition.n_states)
        upper_all = np.full(partition.n_states, floor)
        lower_all[targets] = lower
        upper_all[targets] = upper
        checked = np.union1d(targets, np.flatnonzero(counts))
        frequency = counts[checked] / n
        se = np.sqrt(frequency * (1 - frequency) / n)
        window_lower = lower_all[checked] - WINDOW_SIGMAS * se
        window_upper = upper_all[checked] + WINDOW_SIGMAS * se
        records.append(
            pd.DataFrame(
                {
                    "q": q,
                    "action": action,
                    "q_next": checked,
                    "frequency": frequency,
                    "lower": lower_all[checked],
                    "upper": upper_all[checked],
                    "window_lower": window_lower,
                    "window_upper": window_upper,
                    "within": (frequency >= window_lower - 1e-12)
                    & (frequency <= window_upper + 1e-12),
                }
            )
        )
    frame = pd.concat(records, ignore_index=True)
    fraction = float(frame["within"].mean()) if len(frame) else 1.0
    logger.info(
        "Checked %d transitions of %d pairs: %.4f within 3-sigma windows",
        len(frame),
        len(records),
        fraction,
    )
    return frame, fraction
