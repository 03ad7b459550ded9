import numpy as np
import pandas as pd
import pytest

from ..abstraction import Imdp
from ..geometry import Box, build_partition
from ..ltl import compile_safety
from ..shield import build_product, synthesize
from ..simulation import (
    RunReport,
    random_agent,
    simulate_shielded,
    validate_containment,
    write_report,
)
from ..systems import linear, planar4


def _line_imdp(partition):
    """Loose but sound bounds for the default line system on four cells."""
    n = partition.n_states
    outside = partition.outside
    lower = np.zeros((n, 2, n))
    upper = np.zeros((n, 2, n))
    # contraction maps the domain onto [0.25, 0.75]
    upper[:outside, 0, 1:outside] = 1.0
    # shift by 0.25
    upper[0:2, 1, :outside] = 1.0
    upper[2:outside, 1, 3:] = 1.0
    lower[outside, :, outside] = upper[outside, :, outside] = 1.0
    labels = [partition.label_of(q) for q in range(n)]
    return Imdp.from_dense(lower, upper, labels, ap=partition.ap)


@pytest.fixture(scope="module")
def stay_inside():
    system = linear()
    partition = build_partition(system.domain, 4)
    imdp = _line_imdp(partition)
    _, _, dfa = compile_safety("G(!b)", partition.ap)
    shield = synthesize(build_product(imdp, dfa), p=0.5)
    return system, partition, dfa, shield


def test_shield_blocks_exits(stay_inside):
    _, _, dfa, shield = stay_inside
    z0 = dfa.initial
    assert shield.allowed_actions(0, z0) == (0, 1)
    assert shield.allowed_actions(1, z0) == (0, 1)
    assert shield.allowed_actions(2, z0) == (0,)
    assert shield.allowed_actions(3, z0) == (0,)


def test_shielded_runs_never_violate(stay_inside):
    system, partition, dfa, shield = stay_inside
    report = simulate_shielded(
        system, partition, dfa, shield, steps=60, trajectories=300, batch_size=64
    )
    assert report.trajectories == 300
    assert report.violations == 0
    assert report.violation_rate == 0.0
    assert np.all(report.survival == 60)
    assert report.interventions.sum() > 0
    assert report.region_visits["b"].sum() == 0


def test_unshielded_runs_leave_the_domain(stay_inside):
    system, partition, dfa, shield = stay_inside
    report = simulate_shielded(
        system,
        partition,
        dfa,
        shield,
        steps=60,
        trajectories=200,
        unshielded=True,
        record=True,
    )
    assert not report.shielded
    assert report.violations > 100
    assert report.interventions.sum() == 0
    assert report.cells.shape == (200, 60)
    assert report.dfa_states.shape == (200, 61)
    violated = report.survival < 60
    # the automaton accepts on reading the first q_u label
    for k in np.flatnonzero(violated)[:20]:
        first = np.argmax(report.cells[k] == partition.outside)
        assert report.survival[k] == first
        assert report.dfa_states[k, first + 1] != dfa.initial
    assert report.region_visits["b"][violated].min() == 1


def test_runs_are_seeded(stay_inside):
    system, partition, dfa, shield = stay_inside
    kwargs = dict(steps=30, trajectories=50, batch_size=20, unshielded=True)
    first = simulate_shielded(system, partition, dfa, shield, seed=3, **kwargs)
    second = simulate_shielded(system, partition, dfa, shield, seed=3, **kwargs)
    np.testing.assert_array_equal(first.survival, second.survival)


def test_explicit_initial_states(stay_inside):
    system, partition, dfa, shield = stay_inside

    def always_shift(states, cells, rng):
        return np.ones(states.shape[0], dtype=int)

    report = simulate_shielded(
        system,
        partition,
        dfa,
        shield,
        steps=10,
        trajectories=4,
        agent=always_shift,
        initial_states=[[0.9]],
        require_safe_start=True,
    )
    assert report.violations == 0
    assert report.interventions[0] == 4
    with pytest.raises(ValueError, match="safe set"):
        simulate_shielded(
            system,
            partition,
            dfa,
            shield,
            steps=5,
            trajectories=2,
            initial_states=[[1.5]],
            require_safe_start=True,
        )


def test_simulation_validation(stay_inside):
    system, partition, dfa, shield = stay_inside
    with pytest.raises(ValueError, match="modes"):
        simulate_shielded(planar4(), partition, dfa, shield, steps=5, trajectories=2)
    with pytest.raises(ValueError):
        simulate_shielded(system, partition, dfa, shield, steps=0)
    with pytest.raises(ValueError, match="agent"):
        simulate_shielded(system, partition, dfa, shield, agent="greedy")


def test_report_output(tmp_path):
    report = RunReport(
        trajectories=4,
        steps=10,
        violations=2,
        survival=np.array([10, 3, 10, 7]),
        interventions=np.arange(10),
        region_visits={"g": np.array([0, 1, 2, 1])},
    )
    assert report.violation_rate == 0.5
    counts, edges = report.survival_histogram(bins=5)
    assert counts.sum() == 2
    assert edges[0] == 0 and edges[-1] == 10
    frame = report.to_frame()
    assert frame["violated"].tolist() == [False, True, False, True]
    assert "visits_g" in frame.columns

    summary = tmp_path / "out" / "run.txt"
    write_report(
        summary,
        report,
        histogram=tmp_path / "hist.csv",
        gnuplot=tmp_path / "interventions.dat",
        bins=5,
    )
    text = summary.read_text()
    assert "violations: 2" in text
    assert "violation_rate: 0.5" in text
    assert "interventions: 45" in text
    histogram = pd.read_csv(tmp_path / "hist.csv")
    assert histogram["count"].sum() == 2
    lines = (tmp_path / "interventions.dat").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[4] == "3 3"


def test_random_agent():
    agent = random_agent(3)
    proposals = agent(np.zeros((500, 2)), np.zeros(500), np.random.default_rng(0))
    assert set(proposals.tolist()) == {0, 1, 2}


def _two_cell_imdp(partition, first_target):
    n = partition.n_states
    lower = np.zeros((n, 2, n))
    upper = np.ones((n, 2, n))
    outside = partition.outside
    for q, target in ((0, first_target), (1, 1), (outside, outside)):
        lower[q, 0] = upper[q, 0] = 0.0
        lower[q, 0, target] = upper[q, 0, target] = 1.0
    lower[outside, 1] = upper[outside, 1] = 0.0
    lower[outside, 1, outside] = upper[outside, 1, outside] = 1.0
    labels = [partition.label_of(q) for q in range(n)]
    return Imdp.from_dense(lower, upper, labels, ap=partition.ap)


def test_containment_of_sound_bounds():
    system = linear()
    partition = build_partition(Box([0.0], [1.0]), 2)
    imdp = _two_cell_imdp(partition, first_target=0)
    frame, fraction = validate_containment(
        system, imdp, partition, samples_per_pair=500, pairs=[(0, 0), (1, 0)]
    )
    assert fraction == 1.0
    assert frame["frequency"].tolist() == [1.0, 1.0]
    frame, fraction = validate_containment(system, imdp, partition, 500, seed=1)
    assert fraction == 1.0
    assert set(frame["q"]) == {0, 1, partition.outside}


def test_containment_of_wrong_bounds():
    system = linear()
    partition = build_partition(Box([0.0], [1.0]), 2)
    imdp = _two_cell_imdp(partition, first_target=1)
    frame, fraction = validate_containment(
        system, imdp, partition, samples_per_pair=200, pairs=[(0, 0)]
    )
    assert fraction == 0.0
    assert sorted(frame["q_next"]) == [0, 1]
    with pytest.raises(ValueError):
        validate_containment(system, imdp, partition, samples_per_pair=99)
