from dataclasses import replace

import numpy as np
import pytest

from ..config import (
    AbstractionConfig,
    DataConfig,
    KernelConfig,
    ModelConfig,
    PipelineConfig,
    SimulationConfig,
    SynthesisConfig,
    SystemConfig,
    load_config,
)
from ..gpshield import GPShield, run_simulate, run_synthesize, run_validate
from ..shield import read_shield


@pytest.fixture(scope="module")
def line_config():
    return PipelineConfig(
        name="line",
        system=SystemConfig(name="linear", params={"noise_bound": 0.01}),
        data=DataConfig(per_mode=30, seed=0),
        kernel=KernelConfig(lengthscale=0.3),
        model=ModelConfig(noise_std=0.1, budget=30, rkhs_bounds=2.0),
        abstraction=AbstractionConfig(grid=(10,), delta=0.01),
        synthesis=SynthesisConfig(spec="G(!b)", p=0.5),
        simulation=SimulationConfig(trajectories=40, steps=20, batch_size=16),
    )


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore:The safe set is empty")
def test_line_pipeline(tmp_path, line_config):
    pipeline = GPShield(line_config)
    paths = pipeline.run(tmp_path)
    assert set(paths) == {"dataset", "regressor", "imdp", "shield", "report"}
    assert all(path.is_file() for path in paths.values())

    imdp = pipeline.imdp
    assert imdp.n_states == 11
    assert imdp.partition.counts == (10,)
    shield = read_shield(paths["shield"])
    np.testing.assert_array_equal(shield.allowed, pipeline.shield.allowed)
    assert shield.allowed.any(axis=1).all()
    assert shield.get_partition().counts == (10,)

    # the same shield from disk reproduces the in-memory run
    report = run_simulate(line_config, paths["shield"])
    np.testing.assert_array_equal(report.survival, pipeline.report.survival)
    assert report.trajectories == 40

    strict, dfa = run_synthesize(line_config, paths["imdp"], p=0.01)
    assert strict.p == 0.01
    assert strict.allowed.any(axis=1).all()
    assert np.all(strict.values[strict.safe] < 0.01)
    assert dfa.n_states == 2


@pytest.mark.slow
def test_line_validation(tmp_path, line_config):
    pipeline = GPShield(line_config)
    pipeline.run(simulate=False)
    assert pipeline.report is None
    out = tmp_path / "validation.csv"
    frame, fraction = run_validate(
        line_config, pipeline.imdp, destination=out, samples=200, max_pairs=6
    )
    assert 0.0 <= fraction <= 1.0
    assert set(frame["q"]) <= set(range(11))
    assert frame.groupby(["q", "action"]).ngroups == 6
    assert out.is_file()


def _scaled(name, grid=None, **simulation):
    """Shipped configuration with a shorter simulation and, given a grid, less data."""
    config = load_config(name)
    config = replace(config, simulation=replace(config.simulation, **simulation))
    if grid is None:
        return config
    return replace(
        config,
        data=replace(config.data, per_mode=300),
        model=replace(config.model, budget=60),
        abstraction=replace(config.abstraction, grid=grid),
    )


@pytest.mark.slow
def test_planar_containment():
    config = _scaled("planar4_empty", grid=(4, 4))
    pipeline = GPShield(config)
    pipeline.run(simulate=False)
    assert pipeline.imdp.n_states == 17
    frame, fraction = run_validate(config, pipeline.imdp, samples=10000)
    assert frame.groupby(["q", "action"]).ngroups == 17 * 4
    assert fraction >= 0.99


@pytest.mark.slow
def test_planar_obstacles_shielded():
    config = _scaled("planar4_obstacles", trajectories=500, steps=200, batch_size=250)
    pipeline = GPShield(config)
    pipeline.run(simulate=False)
    shield = pipeline.shield
    assert shield.safe.any()
    shielded = run_simulate(config, shield)
    assert shielded.violations == 0
    assert shielded.interventions.sum() > 0
    unshielded = run_simulate(config, shield, unshielded=True)
    assert unshielded.violations > 0


@pytest.mark.slow
def test_planar_runs_are_reproducible(tmp_path):
    config = _scaled("planar4_empty", grid=(8, 8), trajectories=100, steps=50)
    first = GPShield(config, seed=5).run(tmp_path / "first")
    second = GPShield(config, seed=5).run(tmp_path / "second")
    assert set(first) == set(second)
    for key, path in first.items():
        if key == "regressor":
            with np.load(path) as a, np.load(second[key]) as b:
                assert sorted(a.files) == sorted(b.files)
                for name in a.files:
                    np.testing.assert_array_equal(a[name], b[name])
        else:
            assert path.read_bytes() == second[key].read_bytes()
