"""
Pipeline configuration.

A configuration is a JSON document with one object per section::

    {
      "name": "planar4_obstacles",
      "system": {"name": "planar4", "params": {"noise_bound": 0.01}},
      "data": {"per_mode": 1000},
      "kernel": {"lengthscale": 0.5},
      "model": {"noise_std": 0.1, "budget": 100},
      "abstraction": {"grid": [40, 40], "delta": 1e-9, "regions": [...]},
      "synthesis": {"spec": "G(!b)", "p": 0.05},
      "simulation": {"trajectories": 10000, "steps": 1000}
    }

Missing keys take the defaults below, except ``abstraction.delta`` which
every document must set; unknown keys are rejected.
"""

import json
from dataclasses import dataclass, field, fields, is_dataclass
from importlib.resources import files
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from .geometry import Region
from .reach import ERROR_METHODS, MEAN_METHODS

SHIPPED_CONFIGS = ("planar4_empty", "planar4_obstacles", "planar4_complex")


@dataclass(frozen=True)
class SystemConfig:
    name: str = "planar4"
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class DataConfig:
    per_mode: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.per_mode < 1:
            raise ValueError(
                "data.per_mode must be >= 1, got {m}.".format(m=self.per_mode)
            )


@dataclass(frozen=True)
class KernelConfig:
    signal_variance: float = 1.0
    lengthscale: float = 0.5
    #: JSON file with the layers of a feature map, applied before the kernel.
    feature_map: Optional[str] = None


@dataclass(frozen=True)
class ModelConfig:
    noise_std: float = 0.1
    budget: int = 100
    #: RKHS norm bound per output dimension; estimated on a grid when unset.
    rkhs_bounds: Optional[Union[float, Tuple[float, ...]]] = None
    rkhs_grid: int = 20
    gamma: Union[float, Tuple[float, ...]] = 0.0
    seed: int = 0
    n_jobs: int = 1


@dataclass(frozen=True)
class AbstractionConfig:
    grid: Tuple[int, ...] = (40, 40)
    regions: Tuple[Region, ...] = ()
    outside_label: str = "b"
    noise_cells: Union[int, Tuple[int, ...]] = 1
    #: Confidence of the per-cell error bounds; required, no default is assumed.
    delta: Optional[Union[float, Tuple[float, ...]]] = None
    mean_method: str = "interval"
    error_method: str = "interval"
    subdivisions: int = 1
    n_jobs: int = 1

    def __post_init__(self):
        if self.delta is not None:
            values = self.delta if isinstance(self.delta, tuple) else (self.delta,)
            if not all(0 < value < 1 for value in values):
                message = "abstraction.delta must lie in (0, 1), got {d}."
                raise ValueError(message.format(d=self.delta))
        if self.mean_method not in MEAN_METHODS:
            raise ValueError(
                "abstraction.mean_method must be one of {m}, got '{v}'.".format(
                    m=MEAN_METHODS, v=self.mean_method
                )
            )
        if self.error_method not in ERROR_METHODS:
            raise ValueError(
                "abstraction.error_method must be one of {m}, got '{v}'.".format(
                    m=ERROR_METHODS, v=self.error_method
                )
            )


@dataclass(frozen=True)
class SynthesisConfig:
    spec: str = "G(!b)"
    p: float = 0.05
    tol: float = 1e-6
    max_sweeps: int = 1_000_000

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(
                "synthesis.p must lie in (0, 1], got {p}.".format(p=self.p)
            )
        if not self.tol > 0:
            raise ValueError("synthesis.tol must be > 0, got {t}.".format(t=self.tol))


@dataclass(frozen=True)
class SimulationConfig:
    trajectories: int = 10000
    steps: int = 1000
    batch_size: int = 1000
    seed: int = 0
    n_jobs: int = 1
    require_safe_start: bool = False
    validate_samples: int = 10000
    min_fraction: float = 0.99


@dataclass(frozen=True)
class PipelineConfig:
    name: str = "custom"
    description: str = ""
    system: SystemConfig = field(default_factory=SystemConfig)
    data: DataConfig = field(default_factory=DataConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    abstraction: AbstractionConfig = field(default_factory=AbstractionConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _section(cls, data: Optional[dict], name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError("Section '{name}' must be an object.".format(name=name))
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ValueError(
            "Unknown keys in section '{name}': {keys}.".format(name=name, keys=unknown)
        )
    values = {}
    for key, value in data.items():
        if key == "regions":
            value = tuple(Region.from_dict(region) for region in value)
        elif key != "params":
            value = _freeze(value)
        values[key] = value
    return cls(**values)


def config_from_dict(data: dict) -> PipelineConfig:
    """
    Build a configuration from its JSON object.

    Raises
    ------
    ValueError
        Unknown sections or keys, invalid values, or no ``abstraction.delta``.
    """
    sections = {f.name: f.type for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - set(sections))
    if unknown:
        raise ValueError("Unknown configuration sections: {keys}.".format(keys=unknown))
    values = {}
    for f in fields(PipelineConfig):
        if f.name not in data:
            continue
        default = f.default_factory() if callable(f.default_factory) else None
        if is_dataclass(default):
            values[f.name] = _section(type(default), data[f.name], f.name)
        else:
            values[f.name] = data[f.name]
    if values.get("abstraction", AbstractionConfig()).delta is None:
        raise ValueError(
            "abstraction.delta is required; no default confidence is assumed."
        )
    return PipelineConfig(**values)


def config_to_dict(config: PipelineConfig) -> dict:
    """JSON-ready form of a configuration."""

    def convert(value):
        if isinstance(value, Region):
            return value.to_dict()
        if is_dataclass(value):
            return {f.name: convert(getattr(value, f.name)) for f in fields(value)}
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        return value

    return convert(config)


def load_config(source: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """
    Load a configuration from a JSON file or a shipped configuration name.

    Parameters
    ----------
    source : str or Path, optional
        Path to a JSON file, or one of ``planar4_empty``, ``planar4_obstacles``
        and ``planar4_complex``. None gives the defaults.

    Returns
    -------
    PipelineConfig
        The configuration.

    Raises
    ------
    FileNotFoundError
        Neither a file nor a shipped configuration.
    ValueError
        Malformed content.
    """
    if source is None:
        return PipelineConfig()
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    elif str(source) in SHIPPED_CONFIGS:
        text = (files(__package__) / "data" / "{n}.json".format(n=source)).read_text()
    else:
        raise FileNotFoundError(
            "Configuration {s} is neither a file nor one of {names}.".format(
                s=source, names=SHIPPED_CONFIGS
            )
        )
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        message = "Malformed configuration {s}: {e}".format(s=source, e=err)
        raise ValueError(message) from err
    if not isinstance(data, dict):
        raise ValueError("Configuration {s} must be a JSON object.".format(s=source))
    return config_from_dict(data)
