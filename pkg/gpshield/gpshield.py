"""
Definition of the shield synthesis pipeline execution functions.

Stages, each reading and writing its own file format:

1. ``gen-data``: sample transitions of a benchmark system;
2. ``fit``: fit one GP regressor per mode;
3. ``abstract``: build the IMDP abstraction;
4. ``synthesize``: compile the formula and synthesize the shield;
5. ``simulate``: run shielded (or unshielded) Monte Carlo trajectories;
6. ``validate``: check the IMDP bounds against sampled transitions.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from . import __version__
from .abstraction import Imdp, build_imdp, read_imdp, write_imdp
from .config import PipelineConfig, load_config
from .geometry import Partition, build_partition, partition_noise
from .gp import (
    Dataset,
    KernelSpec,
    Regressor,
    estimate_rkhs_bounds,
    fit,
    load_feature_map,
    load_regressor,
    read_dataset,
    save_regressor,
    write_dataset,
)
from .ltl import Dfa, compile_safety
from .shield import Shield, build_product, read_shield, synthesize, write_shield
from .simulation import RunReport, simulate_shielded, validate_containment, write_report
from .systems import SystemModel, get_system, sample_transitions
from .utils.utils import create_output_path

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ConfigLike = Optional[Union[PipelineConfig, PathLike]]


def _config(config: ConfigLike) -> PipelineConfig:
    if isinstance(config, PipelineConfig):
        return config
    return load_config(config)


def make_system(config: ConfigLike = None) -> SystemModel:
    config = _config(config)
    return get_system(config.system.name, **config.system.params)


def make_kernel(config: ConfigLike = None) -> KernelSpec:
    config = _config(config)
    feature_map = None
    if config.kernel.feature_map is not None:
        feature_map = load_feature_map(config.kernel.feature_map)
    return KernelSpec(
        signal_variance=config.kernel.signal_variance,
        lengthscale=config.kernel.lengthscale,
        feature_map=feature_map,
    )


def make_partition(config: ConfigLike = None) -> Partition:
    config = _config(config)
    system = make_system(config)
    return build_partition(
        system.domain,
        config.abstraction.grid,
        config.abstraction.regions,
        outside_label=config.abstraction.outside_label,
    )


def run_gen_data(
    config: ConfigLike = None,
    destination: Optional[PathLike] = None,
    seed: Optional[int] = None,
    per_mode: Optional[int] = None,
) -> Dataset:
    """
    Sample the training transitions of the configured system.

    Parameters
    ----------
    config : PipelineConfig or path, optional
        Configuration, by default the defaults.
    destination : path, optional
        Dataset file to write.
    seed, per_mode : int, optional
        Override the configured values.

    Returns
    -------
    Dataset
        Sampled transitions.
    """
    config = _config(config)
    dataset = sample_transitions(
        make_system(config),
        per_mode=config.data.per_mode if per_mode is None else per_mode,
        seed=config.data.seed if seed is None else seed,
    )
    if destination is not None:
        write_dataset(destination, dataset)
    return dataset


def run_fit(
    config: ConfigLike,
    dataset: Union[Dataset, PathLike],
    destination: Optional[PathLike] = None,
    seed: Optional[int] = None,
) -> Regressor:
    """
    Fit the per-mode regressors.

    The RKHS norm bounds are estimated from the configured system on a grid
    when the configuration leaves them unset.
    """
    config = _config(config)
    if not isinstance(dataset, Dataset):
        dataset = read_dataset(dataset)
    kernel = make_kernel(config)
    model = config.model
    rkhs_bounds = model.rkhs_bounds
    if rkhs_bounds is None:
        system = make_system(config)
        rkhs_bounds = estimate_rkhs_bounds(
            system.mean, dataset.actions, system.domain, kernel, model.rkhs_grid
        )
        logger.info("Using derived RKHS bounds %s", rkhs_bounds)
    regressor = fit(
        dataset,
        kernel,
        noise_std=model.noise_std,
        budget=model.budget,
        rkhs_bounds=rkhs_bounds,
        gamma=model.gamma,
        seed=model.seed if seed is None else seed,
        n_jobs=model.n_jobs,
    )
    if destination is not None:
        save_regressor(destination, regressor)
    return regressor


def run_abstract(
    config: ConfigLike,
    regressor: Union[Regressor, PathLike],
    destination: Optional[PathLike] = None,
) -> Imdp:
    """Build the IMDP abstraction of a fitted regressor."""
    config = _config(config)
    if config.abstraction.delta is None:
        raise ValueError(
            "abstraction.delta is required to build the abstraction; set it in "
            "the configuration."
        )
    if not isinstance(regressor, Regressor):
        regressor = load_regressor(regressor)
    abstraction = config.abstraction
    partition = make_partition(config)
    noise = partition_noise(
        regressor.noise_bound, abstraction.noise_cells, dim=regressor.dim
    )
    imdp = build_imdp(
        regressor,
        partition,
        noise,
        abstraction.delta,
        mean_method=abstraction.mean_method,
        error_method=abstraction.error_method,
        subdivisions=abstraction.subdivisions,
        n_jobs=abstraction.n_jobs,
    )
    if destination is not None:
        write_imdp(destination, imdp)
    return imdp


def run_synthesize(
    config: ConfigLike,
    imdp: Union[Imdp, PathLike],
    destination: Optional[PathLike] = None,
    spec: Optional[str] = None,
    p: Optional[float] = None,
    tol: Optional[float] = None,
) -> Tuple[Shield, Dfa]:
    """
    Compile the safety formula and synthesize the shield.

    Returns
    -------
    Tuple[Shield, Dfa]
        The shield and the violation automaton it was built with.
    """
    config = _config(config)
    if not isinstance(imdp, Imdp):
        imdp = read_imdp(imdp)
    synthesis = config.synthesis
    spec = synthesis.spec if spec is None else spec
    _, _, dfa = compile_safety(spec, imdp.ap)
    logger.info("Compiled '%s' into a DFA with %d states", spec, dfa.n_states)
    product = build_product(imdp, dfa)
    shield = synthesize(
        product,
        synthesis.p if p is None else p,
        tol=synthesis.tol if tol is None else tol,
        max_sweeps=synthesis.max_sweeps,
        spec=spec,
        ap=dfa.ap,
        dfa_initial=dfa.initial,
        partition=imdp.partition,
    )
    if destination is not None:
        write_shield(destination, shield)
    return shield, dfa


def _shield_context(shield: Shield, config: PipelineConfig) -> Tuple[Partition, Dfa]:
    partition = shield.get_partition()
    if partition is None:
        partition = make_partition(config)
    _, _, dfa = compile_safety(shield.spec, shield.ap)
    return partition, dfa


def run_simulate(
    config: ConfigLike,
    shield: Union[Shield, PathLike],
    destination: Optional[PathLike] = None,
    seed: Optional[int] = None,
    trajectories: Optional[int] = None,
    steps: Optional[int] = None,
    unshielded: bool = False,
    histogram: Optional[PathLike] = None,
    gnuplot: Optional[PathLike] = None,
    record: bool = False,
) -> RunReport:
    """Simulate the configured system under the shield."""
    config = _config(config)
    if not isinstance(shield, Shield):
        shield = read_shield(shield)
    partition, dfa = _shield_context(shield, config)
    simulation = config.simulation
    report = simulate_shielded(
        make_system(config),
        partition,
        dfa,
        shield,
        steps=simulation.steps if steps is None else steps,
        trajectories=simulation.trajectories if trajectories is None else trajectories,
        seed=simulation.seed if seed is None else seed,
        unshielded=unshielded,
        require_safe_start=simulation.require_safe_start,
        batch_size=simulation.batch_size,
        n_jobs=simulation.n_jobs,
        record=record,
    )
    if destination is not None:
        write_report(destination, report, histogram=histogram, gnuplot=gnuplot)
    return report


def run_validate(
    config: ConfigLike,
    imdp: Union[Imdp, PathLike],
    destination: Optional[PathLike] = None,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
    max_pairs: Optional[int] = None,
) -> Tuple[pd.DataFrame, float]:
    """
    Check the IMDP bounds against sampled one-step transitions.

    Parameters
    ----------
    max_pairs : int, optional
        Test a seeded random subset of this many (state, mode) pairs instead
        of all of them.
    """
    config = _config(config)
    if not isinstance(imdp, Imdp):
        imdp = read_imdp(imdp)
    partition = imdp.partition if imdp.partition is not None else make_partition(config)
    seed = config.simulation.seed if seed is None else seed
    pairs = [(q, a) for q in range(partition.n_states) for a in imdp.actions]
    if max_pairs is not None and max_pairs < len(pairs):
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(len(pairs), size=max_pairs, replace=False))
        pairs = [pairs[i] for i in picked]
    frame, fraction = validate_containment(
        make_system(config),
        imdp,
        partition,
        samples_per_pair=(
            config.simulation.validate_samples if samples is None else samples
        ),
        seed=seed,
        pairs=pairs,
    )
    if destination is not None:
        frame.to_csv(
            create_output_path(destination),
            index=False,
            float_format="%.17g",
            lineterminator="\n",
        )
    return frame, fraction


class GPShield:
    __version__ = __version__

    def __init__(self, config: ConfigLike = None, seed: Optional[int] = None) -> None:
        """
        Initializes a new :class:`GPShield` pipeline.

        Parameters
        ----------
        config : PipelineConfig or path, optional
            Configuration or the name of a shipped one, by default the
            defaults.
        seed : int, optional
            Overrides the data and simulation seeds.
        """
        self.config = _config(config)
        self.seed = seed

        self._dataset = None
        self._regressor = None
        self._imdp = None
        self._shield = None
        self._dfa = None
        self._report = None

    @property
    def shield(self) -> Optional[Shield]:
        return self._shield

    @property
    def imdp(self) -> Optional[Imdp]:
        return self._imdp

    @property
    def report(self) -> Optional[RunReport]:
        return self._report

    def run(
        self, destination: Optional[PathLike] = None, simulate: bool = True
    ) -> Dict[str, Path]:
        """
        Run every stage in memory and, given a destination directory, export
        the results.
        """
        self._dataset = run_gen_data(self.config, seed=self.seed)
        self._regressor = run_fit(self.config, self._dataset)
        self._imdp = run_abstract(self.config, self._regressor)
        self._shield, self._dfa = run_synthesize(self.config, self._imdp)
        self._report = None
        if simulate:
            self._report = run_simulate(self.config, self._shield, seed=self.seed)
        if destination is None:
            return {}
        return self.export_results(destination)

    def export_results(self, destination: PathLike) -> Dict[str, Path]:
        destination = Path(destination)
        name = self.config.name
        paths = {}
        if self._dataset is not None:
            paths["dataset"] = write_dataset(
                destination / "{n}.data.csv".format(n=name), self._dataset
            )
        if self._regressor is not None:
            paths["regressor"] = save_regressor(
                destination / "{n}.gp.npz".format(n=name), self._regressor
            )
        if self._imdp is not None:
            paths["imdp"] = write_imdp(
                destination / "{n}.imdp".format(n=name), self._imdp
            )
        if self._shield is not None:
            paths["shield"] = write_shield(
                destination / "{n}.shield".format(n=name), self._shield
            )
        if self._report is not None:
            paths["report"] = write_report(
                destination / "{n}.report.txt".format(n=name),
                self._report,
                histogram=destination / "{n}.survival.csv".format(n=name),
            )
        return paths
