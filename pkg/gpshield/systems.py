"""
Benchmark switched systems ``x+ = f(x, a) + v`` with uniform bounded noise.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .geometry import Box
from .gp import Dataset

logger = logging.getLogger(__name__)

Dynamics = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    Switched stochastic system.

    Attributes
    ----------
    name : str
        Registry name.
    dim : int
        State dimension n.
    actions : Tuple[int, ...]
        Mode ids.
    dynamics : Callable
        ``dynamics(x, a)`` maps states of shape (k, n) to successors of the
        same shape under mode ``a``.
    noise_bound : float
        Half width of the uniform noise support.
    domain : Box
        Safe domain X.
    """

    name: str
    dim: int
    actions: Tuple[int, ...]
    dynamics: Dynamics
    noise_bound: float
    domain: Box

    def __post_init__(self):
        if self.noise_bound < 0:
            raise ValueError(
                "Noise bound must be >= 0, got {s}.".format(s=self.noise_bound)
            )
        if self.domain.dim != self.dim:
            raise ValueError(
                "Domain dimension {d} differs from the state dimension {n}.".format(
                    d=self.domain.dim, n=self.dim
                )
            )

    def mean(self, x, action: int) -> np.ndarray:
        """Noise-free successor of the states *x* under one mode."""
        if action not in self.actions:
            raise ValueError(
                "Unknown mode {a}, expected one of {u}.".format(
                    a=action, u=self.actions
                )
            )
        return self.dynamics(np.atleast_2d(np.asarray(x, dtype=float)), action)

    def noise(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.noise_bound == 0:
            return np.zeros((size, self.dim))
        return rng.uniform(-self.noise_bound, self.noise_bound, size=(size, self.dim))

    def step(self, x, actions, rng: np.random.Generator) -> np.ndarray:
        """
        One noisy step of every state under its own mode.

        Parameters
        ----------
        x : array-like
            States of shape (k, n).
        actions : array-like
            Mode per state, shape (k,).
        rng : np.random.Generator
            Noise source.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        actions = np.broadcast_to(np.asarray(actions), (x.shape[0],))
        successors = np.empty_like(x)
        for action in np.unique(actions):
            mask = actions == action
            successors[mask] = self.mean(x[mask], int(action))
        return successors + self.noise(rng, x.shape[0])


def _planar4(x: np.ndarray, action: int) -> np.ndarray:
    x0, x1 = x[:, 0], x[:, 1]
    if action == 0:
        return np.stack([x0 + 0.5 + 0.2 * np.sin(x1), x1 + 0.4 * np.cos(x0)], axis=1)
    if action == 1:
        return np.stack([x0 - 0.5 + 0.2 * np.sin(x1), x1 + 0.4 * np.cos(x0)], axis=1)
    if action == 2:
        return np.stack([x0 + 0.4 * np.cos(x1), x1 + 0.5 + 0.2 * np.sin(x0)], axis=1)
    return np.stack([x0 + 0.4 * np.cos(x1), x1 - 0.5 + 0.2 * np.sin(x0)], axis=1)


def planar4(noise_bound: float = 0.01, bound: float = 2.0) -> SystemModel:
    """
    Four-mode planar system on ``[-bound, bound]^2``.

    Modes 0 and 1 push the first coordinate right and left, modes 2 and 3
    push the second coordinate up and down, each with a bounded trigonometric
    coupling to the other coordinate.
    """
    return SystemModel(
        name="planar4",
        dim=2,
        actions=(0, 1, 2, 3),
        dynamics=_planar4,
        noise_bound=noise_bound,
        domain=Box([-bound, -bound], [bound, bound]),
    )


def linear(
    matrices: Optional[Sequence] = None,
    offsets: Optional[Sequence] = None,
    noise_bound: float = 0.0,
    lower: Sequence[float] = (0.0,),
    upper: Sequence[float] = (1.0,),
) -> SystemModel:
    """
    Affine modes ``x+ = A_a x + b_a``, by default a one-dimensional
    contraction towards 0.5 and a shift by 0.25.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dim = lower.size
    if matrices is None:
        matrices = [0.5 * np.eye(dim), np.eye(dim)]
        offsets = [np.full(dim, 0.25), np.full(dim, 0.25)]
    matrices = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
    if offsets is None:
        offsets = [np.zeros(dim)] * len(matrices)
    offsets = [np.asarray(b, dtype=float).reshape(dim) for b in offsets]
    if len(offsets) != len(matrices):
        raise ValueError("Each mode needs one matrix and one offset.")
    for m in matrices:
        if m.shape != (dim, dim):
            raise ValueError(
                "Mode matrices must be {n}x{n}, got {s}.".format(n=dim, s=m.shape)
            )

    def dynamics(x: np.ndarray, action: int) -> np.ndarray:
        return x @ matrices[action].T + offsets[action]

    return SystemModel(
        name="linear",
        dim=dim,
        actions=tuple(range(len(matrices))),
        dynamics=dynamics,
        noise_bound=noise_bound,
        domain=Box(lower, upper),
    )


SYSTEMS: Dict[str, Callable[..., SystemModel]] = {
    "planar4": planar4,
    "linear": linear,
}


def get_system(name: str, **params) -> SystemModel:
    """
    Build a registered system.

    Raises
    ------
    ValueError
        Unknown system name.
    """
    try:
        factory = SYSTEMS[name]
    except KeyError:
        raise ValueError(
            "Unknown system '{name}', expected one of {names}.".format(
                name=name, names=sorted(SYSTEMS)
            )
        ) from None
    return factory(**params)


def sample_transitions(system: SystemModel, per_mode: int, seed: int = 0) -> Dataset:
    """
    Sample transitions with inputs uniform over the domain.

    Parameters
    ----------
    system : SystemModel
        System to sample.
    per_mode : int
        Transitions per mode, >= 1.
    seed : int, optional
        Seed of the generator, by default 0.

    Returns
    -------
    Dataset
        Transitions of every mode.
    """
    if per_mode < 1:
        raise ValueError("per_mode must be >= 1, got {m}.".format(m=per_mode))
    rng = np.random.default_rng(seed)
    domain = system.domain
    inputs, outputs = {}, {}
    for action in system.actions:
        x = rng.uniform(domain.lower, domain.upper, size=(per_mode, system.dim))
        inputs[action] = x
        outputs[action] = system.mean(x, action) + system.noise(rng, per_mode)
    logger.info(
        "Sampled %d transitions per mode of '%s' (seed %d)", per_mode, system.name, seed
    )
    return Dataset(inputs=inputs, outputs=outputs, noise_bound=system.noise_bound)
