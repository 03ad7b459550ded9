"""
Kernel regression over sampled transitions with posterior mean, posterior
variance and uniform error bounds per action and output dimension.

All output dimensions of one action share the same kernel and retained inputs,
so the solve matrix ``G = (K + sigma_n^2 I)^-1`` is stored once per action and
the weights for every output dimension are the columns of ``W = G Y``.
"""

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .utils.utils import read_commented_csv, validate_file, write_commented_csv

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    "tanh": np.tanh,
    "identity": lambda h: h,
}

#: Initial jitter and number of tenfold escalations tried on a failed factorization.
JITTER: float = 1e-10
JITTER_ESCALATIONS: int = 3
#: Variances in [-VARIANCE_TOLERANCE, 0) are clamped to 0, below that they are an error.
VARIANCE_TOLERANCE: float = 1e-12
REGRESSOR_FORMAT_VERSION: int = 1


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine layer ``h -> act(h W^T + b)`` with a monotone activation."""

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        weight = np.array(self.weight, dtype=float, ndmin=2)
        bias = np.array(self.bias, dtype=float, ndmin=1)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            message = (
                "Layer weight of shape {w} is incompatible with bias of shape "
                "{b}.".format(w=weight.shape, b=bias.shape)
            )
            raise ValueError(message)
        if self.activation not in ACTIVATIONS:
            message = "Unknown activation '{a}', expected one of {known}.".format(
                a=self.activation, known=sorted(ACTIVATIONS)
            )
            raise ValueError(message)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    def __call__(self, h: np.ndarray) -> np.ndarray:
        return ACTIVATIONS[self.activation](h @ self.weight.T + self.bias)

    def propagate(self, center: np.ndarray, radius: np.ndarray):
        """
        Exact interval image of boxes given by center/radius through the
        affine map followed by the monotone activation.
        """
        mid = center @ self.weight.T + self.bias
        rad = radius @ np.abs(self.weight).T
        act = ACTIVATIONS[self.activation]
        lower, upper = act(mid - rad), act(mid + rad)
        return 0.5 * (lower + upper), 0.5 * (upper - lower)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Fixed feed-forward feature map ``psi`` applied before the base kernel."""

    layers: Tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("A feature map needs at least one layer.")
        for previous, current in zip(layers[:-1], layers[1:]):
            if current.weight.shape[1] != previous.weight.shape[0]:
                message = (
                    "Layer of input size {i} cannot follow a layer of output size "
                    "{o}.".format(
                        i=current.weight.shape[1], o=previous.weight.shape[0]
                    )
                )
                raise ValueError(message)
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        for layer in self.layers:
            h = layer(h)
        return h

    def propagate(self, lower: np.ndarray, upper: np.ndarray):
        """Interval enclosure of the image of boxes (k, n) -> (k, s)."""
        center = 0.5 * (lower + upper)
        radius = 0.5 * (upper - lower)
        for layer in self.layers:
            center, radius = layer.propagate(center, radius)
        return center - radius, center + radius

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "weight": layer.weight.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation,
                }
                for layer in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureMap":
        try:
            layers = [
                Layer(
                    weight=layer["weight"],
                    bias=layer["bias"],
                    activation=layer.get("activation", "tanh"),
                )
                for layer in data["layers"]
            ]
        except (KeyError, TypeError) as e:
            message = "Malformed feature map description: {e}".format(e=e)
            raise ValueError(message) from e
        return cls(tuple(layers))


def load_feature_map(path: Union[str, Path]) -> FeatureMap:
    """
    Read a feature map from a JSON layer list.

    Parameters
    ----------
    path : Path
        File with ``{"layers": [{"weight", "bias", "activation"}, ...]}``,
        weights stored row-major.

    Returns
    -------
    FeatureMap
        The feature map.
    """
    path = validate_file(path, "feature map")
    with open(path, "r") as f:
        return FeatureMap.from_dict(json.load(f))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    Squared exponential kernel, optionally composed with a fixed feature map.

    ``k(x, x') = signal_variance * exp(-|psi(x) - psi(x')|^2 / (2 lengthscale^2))``
    """

    signal_variance: float = 1.0
    lengthscale: float = 1.0
    feature_map: Optional[FeatureMap] = None

    def __post_init__(self):
        if not self.signal_variance > 0:
            raise ValueError(
                "Signal variance must be > 0, got {s}.".format(s=self.signal_variance)
            )
        if not self.lengthscale > 0:
            raise ValueError(
                "Lengthscale must be > 0, got {l}.".format(l=self.lengthscale)
            )

    def features(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.feature_map is None:
            return x
        return self.feature_map(x)

    def from_sqdist(self, sqdist: np.ndarray) -> np.ndarray:
        return self.signal_variance * np.exp(-0.5 * sqdist / self.lengthscale**2)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Kernel matrix between the rows of *x* and *y*."""
        sqdist = cdist(self.features(x), self.features(y), "sqeuclidean")
        return self.from_sqdist(sqdist)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Sampled transitions grouped by action.

    Parameters
    ----------
    inputs : Dict[int, np.ndarray]
        Per action, states of shape (m_a, n).
    outputs : Dict[int, np.ndarray]
        Per action, successors of shape (m_a, n).
    noise_bound : float
        Half width ``sigma_v`` of the additive noise support.
    noise_density : str
        Noise density descriptor; only "uniform" is built in.
    """

    inputs: Dict[int, np.ndarray]
    outputs: Dict[int, np.ndarray]
    noise_bound: float
    noise_density: str = "uniform"

    def __post_init__(self):
        if sorted(self.inputs) != sorted(self.outputs):
            raise ValueError("Inputs and outputs must cover the same actions.")
        if self.noise_bound < 0:
            raise ValueError(
                "Noise bound must be >= 0, got {s}.".format(s=self.noise_bound)
            )
        if self.noise_density != "uniform":
            raise ValueError(
                "Unsupported noise density '{d}', only 'uniform' is built in.".format(
                    d=self.noise_density
                )
            )
        inputs, outputs = {}, {}
        for action in sorted(self.inputs):
            x = np.atleast_2d(np.asarray(self.inputs[action], dtype=float))
            y = np.atleast_2d(np.asarray(self.outputs[action], dtype=float))
            if x.shape != y.shape:
                message = "Action {a}: inputs {x} and outputs {y} differ in shape."
                message = message.format(a=action, x=x.shape, y=y.shape)
                raise ValueError(message)
            inputs[int(action)] = x
            outputs[int(action)] = y
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)

    @property
    def actions(self) -> Tuple[int, ...]:
        return tuple(sorted(self.inputs))

    @property
    def dim(self) -> int:
        return next(iter(self.inputs.values())).shape[1]

    def __len__(self) -> int:
        return sum(x.shape[0] for x in self.inputs.values())

    def to_frame(self) -> pd.DataFrame:
        n = self.dim
        frames = []
        for action in self.actions:
            frame = pd.DataFrame(
                np.hstack([self.inputs[action], self.outputs[action]]),
                columns=["x{i}".format(i=i) for i in range(n)]
                + ["y{i}".format(i=i) for i in range(n)],
            )
            frame.insert(0, "action", action)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)


def write_dataset(path: Union[str, Path], dataset: Dataset) -> Path:
    """Write a dataset as CSV with a ``#`` header naming n, actions and sigma_v."""
    header = {
        "n": dataset.dim,
        "actions": len(dataset.actions),
        "noise_bound": repr(float(dataset.noise_bound)),
        "noise_density": dataset.noise_density,
    }
    return write_commented_csv(path, header, dataset.to_frame())


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset written by :func:`write_dataset`."""
    header, frame = read_commented_csv(validate_file(path, "dataset"))
    try:
        n = int(header["n"])
        noise_bound = float(header["noise_bound"])
    except KeyError as e:
        raise ValueError("Dataset header is missing {key}.".format(key=e)) from e
    x_columns = ["x{i}".format(i=i) for i in range(n)]
    y_columns = ["y{i}".format(i=i) for i in range(n)]
    missing = set(["action"] + x_columns + y_columns) - set(frame.columns)
    if missing:
        raise ValueError(
            "Dataset is missing columns {cols}.".format(cols=sorted(missing))
        )
    inputs, outputs = {}, {}
    for action, group in frame.groupby("action", sort=True):
        inputs[int(action)] = group[x_columns].to_numpy(dtype=float)
        outputs[int(action)] = group[y_columns].to_numpy(dtype=float)
    if len(inputs) != int(header.get("actions", len(inputs))):
        raise ValueError("Dataset header and records disagree on the action count.")
    return Dataset(
        inputs,
        outputs,
        noise_bound=noise_bound,
        noise_density=header.get("noise_density", "uniform"),
    )


@dataclass(frozen=True, eq=False)
class ActionModel:
    """Precomputed regression quantities of one action."""

    inputs: np.ndarray
    features: np.ndarray
    targets: np.ndarray
    solve: np.ndarray
    weights: np.ndarray
    jitter: float = 0.0

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True, eq=False)
class Regressor:
    """
    Fitted kernel regressor for every action.

    Attributes
    ----------
    kernel : KernelSpec
        Kernel shared by all actions.
    noise_std : float
        Regression noise parameter ``sigma_n``.
    noise_bound : float
        Process noise half width ``sigma_v`` (feeds ``lambda_x``).
    rkhs_bounds : np.ndarray
        RKHS norm bounds ``B_i`` per output dimension.
    gamma : np.ndarray
        Information constants per output dimension.
    models : Dict[int, ActionModel]
        Per-action precomputations.
    """

    kernel: KernelSpec
    noise_std: float
    noise_bound: float
    rkhs_bounds: np.ndarray
    gamma: np.ndarray
    models: Dict[int, ActionModel] = field(repr=False)

    @property
    def actions(self) -> Tuple[int, ...]:
        return tuple(sorted(self.models))

    @property
    def dim(self) -> int:
        return self.rkhs_bounds.size

    @property
    def beta(self) -> np.ndarray:
        """``sqrt(B_i^2 - gamma_i)`` per output dimension."""
        return np.sqrt(np.maximum(self.rkhs_bounds**2 - self.gamma, 0.0))

    def model(self, action: int) -> ActionModel:
        try:
            return self.models[int(action)]
        except KeyError:
            message = "Action {a} is not in the regressor actions {known}.".format(
                a=action, known=self.actions
            )
            raise ValueError(message) from None


def _factorize(gram: np.ndarray, noise_var: float):
    """Cholesky factor of ``gram + noise_var I`` with jitter escalation."""
    size = gram.shape[0]
    eps = np.finfo(float).eps
    attempts = [0.0]
    if noise_var > 0:
        attempts += [JITTER * 10**i for i in range(JITTER_ESCALATIONS + 1)]
    for jitter in attempts:
        matrix = gram + (noise_var + jitter) * np.eye(size)
        try:
            factor = cho_factor(matrix, lower=True, check_finite=True)
        except LinAlgError:
            logger.debug("Factorization failed with jitter %g", jitter)
            continue
        pivots = np.diag(factor[0]) ** 2
        if pivots.min() <= size * eps * np.max(np.diag(matrix)):
            logger.debug("Factorization numerically singular with jitter %g", jitter)
            continue
        if jitter > 0:
            message = (
                "Kernel matrix required jitter {j:g} to factorize; the retained "
                "data may be nearly degenerate.".format(j=jitter)
            )
            warnings.warn(message)
            logger.warning(message)
        return factor, jitter
    message = (
        "Kernel matrix K + sigma_n^2 I of size {m} is singular or not positive "
        "definite (sigma_n^2 = {s:g}); check for duplicate inputs or a degenerate "
        "kernel.".format(m=size, s=noise_var)
    )
    raise LinAlgError(message)


def _fit_action(
    x: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpec,
    noise_std: float,
    budget: int,
    seed: int,
    action: int,
) -> ActionModel:
    rng = np.random.default_rng([seed, action])
    order = rng.permutation(x.shape[0])[:budget]
    x, y = x[order], y[order]
    features = kernel.features(x)
    gram = kernel.from_sqdist(cdist(features, features, "sqeuclidean"))
    factor, jitter = _factorize(gram, noise_std**2)
    solve = cho_solve(factor, np.eye(x.shape[0]))
    solve = 0.5 * (solve + solve.T)
    weights = cho_solve(factor, y)
    logger.debug("Fitted action %d on %d retained points", action, x.shape[0])
    return ActionModel(
        inputs=x,
        features=features,
        targets=y,
        solve=solve,
        weights=weights,
        jitter=jitter,
    )


def fit(
    dataset: Dataset,
    kernel: KernelSpec,
    noise_std: float,
    budget: int,
    rkhs_bounds: Union[float, Sequence[float]],
    gamma: Union[float, Sequence[float]] = 0.0,
    seed: int = 0,
    n_jobs: int = 1,
) -> Regressor:
    """
    Precompute solve matrices and weights for every action.

    Parameters
    ----------
    dataset : Dataset
        Sampled transitions.
    kernel : KernelSpec
        Kernel hyperparameters.
    noise_std : float
        Regression noise parameter ``sigma_n`` (0 interpolates exactly).
    budget : int
        Number of retained posterior points per action; the first *budget*
        points after a seeded shuffle are kept.
    rkhs_bounds : float or Sequence[float]
        RKHS norm bounds ``B_i`` per output dimension.
    gamma : float or Sequence[float], optional
        Information constants per output dimension, by default 0.
    seed : int, optional
        Shuffle seed, by default 0.
    n_jobs : int, optional
        Parallel workers over actions, by default 1.

    Returns
    -------
    Regressor
        The fitted regressor.

    Raises
    ------
    ValueError
        Invalid budget, negative bounds or ``gamma > B^2``.
    LinAlgError
        Singular kernel matrix.
    """
    n = dataset.dim
    if noise_std < 0:
        raise ValueError("sigma_n must be >= 0, got {s}.".format(s=noise_std))
    if budget < 1:
        raise ValueError("Posterior budget must be >= 1, got {b}.".format(b=budget))
    for action in dataset.actions:
        available = dataset.inputs[action].shape[0]
        if budget > available:
            message = (
                "Posterior budget {b} exceeds the {m} samples of action {a}.".format(
                    b=budget, m=available, a=action
                )
            )
            raise ValueError(message)
    if kernel.feature_map is not None and kernel.feature_map.input_dim != n:
        raise ValueError(
            "Feature map expects {i} inputs but the dataset has dimension {n}.".format(
                i=kernel.feature_map.input_dim, n=n
            )
        )
    bounds = np.broadcast_to(np.asarray(rkhs_bounds, dtype=float), (n,)).copy()
    gammas = np.broadcast_to(np.asarray(gamma, dtype=float), (n,)).copy()
    if np.any(bounds < 0) or np.any(gammas < 0):
        raise ValueError(
            "RKHS bounds and gamma must be >= 0, got {b} and {g}.".format(
                b=bounds, g=gammas
            )
        )
    if np.any(gammas > bounds**2):
        message = (
            "gamma {g} exceeds B^2 {b2}; the RKHS bound is inconsistent with the "
            "information constant.".format(g=gammas, b2=bounds**2)
        )
        raise ValueError(message)

    fitted = Parallel(n_jobs=n_jobs)(
        delayed(_fit_action)(
            dataset.inputs[action],
            dataset.outputs[action],
            kernel,
            noise_std,
            budget,
            seed,
            action,
        )
        for action in dataset.actions
    )
    logger.info(
        "Fitted regressor for %d actions with %d posterior points each",
        len(fitted),
        budget,
    )
    for array in (bounds, gammas):
        array.flags.writeable = False
    return Regressor(
        kernel=kernel,
        noise_std=float(noise_std),
        noise_bound=float(dataset.noise_bound),
        rkhs_bounds=bounds,
        gamma=gammas,
        models=dict(zip(dataset.actions, fitted)),
    )


def _kernel_vector(reg: Regressor, model: ActionModel, x: np.ndarray) -> np.ndarray:
    features = reg.kernel.features(x)
    return reg.kernel.from_sqdist(cdist(features, model.features, "sqeuclidean"))


def _as_queries(x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Query states must be finite.")
    return np.atleast_2d(x), x.ndim == 1


def posterior_mean(reg: Regressor, action: int, x) -> np.ndarray:
    """
    Posterior mean ``K_{x,X} W`` per output dimension.

    Parameters
    ----------
    reg : Regressor
        Fitted regressor.
    action : int
        Action.
    x : array_like
        State (n,) or states (k, n).

    Returns
    -------
    np.ndarray
        Shape (n,) or (k, n).
    """
    model = reg.model(action)
    queries, single = _as_queries(x)
    mean = _kernel_vector(reg, model, queries) @ model.weights
    return mean[0] if single else mean


def _clamp_variance(variance: np.ndarray, signal_variance: float) -> np.ndarray:
    if np.any(variance < -VARIANCE_TOLERANCE):
        message = (
            "Posterior variance {v:g} is below -{tol:g}; the solve matrix is "
            "broken.".format(v=variance.min(), tol=VARIANCE_TOLERANCE)
        )
        raise RuntimeError(message)
    return np.clip(variance, 0.0, signal_variance)


def posterior_var(reg: Regressor, action: int, x) -> np.ndarray:
    """
    Posterior variance ``k(x, x) - K_{x,X} G K_{X,x}`` per output dimension.

    All output dimensions share the value.
    """
    model = reg.model(action)
    queries, single = _as_queries(x)
    k = _kernel_vector(reg, model, queries)
    variance = reg.kernel.signal_variance - np.sum((k @ model.solve) * k, axis=1)
    variance = _clamp_variance(variance, reg.kernel.signal_variance)
    variance = np.repeat(variance[:, None], reg.dim, axis=1)
    return variance[0] if single else variance


def check_confidence(delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0) or np.any(delta >= 1):
        raise ValueError("delta must lie in (0, 1), got {d}.".format(d=delta))
    return delta


def error_bound(reg: Regressor, action: int, x, delta) -> np.ndarray:
    """
    Uniform error bound ``eps_i = sigma_D(x) sqrt(B_i^2 - gamma_i)
    + sqrt(lambda_x / 2 ln(2 / delta))`` with
    ``lambda_x = 4 sigma_v^2 |G K_{X,x}|^2``.

    Parameters
    ----------
    reg : Regressor
        Fitted regressor.
    action : int
        Action.
    x : array_like
        State (n,) or states (k, n).
    delta : float or array_like
        Confidence parameter in (0, 1), scalar or per output dimension.

    Returns
    -------
    np.ndarray
        Shape (n,) or (k, n).
    """
    delta = check_confidence(delta)
    model = reg.model(action)
    queries, single = _as_queries(x)
    k = _kernel_vector(reg, model, queries)
    gk = k @ model.solve
    variance = reg.kernel.signal_variance - np.sum(gk * k, axis=1)
    variance = _clamp_variance(variance, reg.kernel.signal_variance)
    lam = 4.0 * reg.noise_bound**2 * np.sum(gk**2, axis=1)
    eps = np.sqrt(variance)[:, None] * reg.beta + np.sqrt(
        0.5 * lam[:, None] * np.log(2.0 / delta)
    )
    return eps[0] if single else eps


def estimate_rkhs_bounds(
    dynamics,
    actions: Sequence[int],
    domain,
    kernel: KernelSpec,
    grid_counts: Union[int, Sequence[int]] = 20,
    jitter: float = 1e-8,
) -> np.ndarray:
    """
    Estimate RKHS norm bounds from the dense grid interpolant.

    For every action and output dimension the interpolant norm
    ``sqrt(y^T (K + jitter I)^-1 y)`` of the true dynamics sampled on a uniform
    grid is computed; the maximum over actions is returned.

    Parameters
    ----------
    dynamics : Callable[[np.ndarray, int], np.ndarray]
        Noise-free transition map ``f(x, a)`` acting on (k, n) arrays.
    actions : Sequence[int]
        Actions to include.
    domain : Box
        Grid domain.
    kernel : KernelSpec
        Kernel whose RKHS norm is estimated.
    grid_counts : int or Sequence[int], optional
        Grid points per dimension, by default 20.
    jitter : float, optional
        Diagonal regularization, by default 1e-8.

    Returns
    -------
    np.ndarray
        Estimated ``B_i`` per output dimension.
    """
    counts = np.broadcast_to(np.asarray(grid_counts, dtype=int), (domain.dim,))
    axes = [
        np.linspace(lo, hi, c) for lo, hi, c in zip(domain.lower, domain.upper, counts)
    ]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    gram = kernel(grid, grid)
    factor, _ = _factorize(gram, jitter)
    bounds = np.zeros(domain.dim)
    for action in actions:
        values = np.asarray(dynamics(grid, action), dtype=float)
        coefficients = cho_solve(factor, values)
        norms = np.sqrt(np.maximum(np.sum(values * coefficients, axis=0), 0.0))
        bounds = np.maximum(bounds, norms)
    logger.info("Estimated RKHS bounds %s on a %s grid", bounds, tuple(counts))
    return bounds


def save_regressor(path: Union[str, Path], reg: Regressor) -> Path:
    """Write a regressor to a versioned ``.npz`` archive."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "format_version": np.array(REGRESSOR_FORMAT_VERSION),
        "signal_variance": np.array(reg.kernel.signal_variance),
        "lengthscale": np.array(reg.kernel.lengthscale),
        "feature_map": np.array(
            json.dumps(reg.kernel.feature_map.to_dict())
            if reg.kernel.feature_map is not None
            else ""
        ),
        "noise_std": np.array(reg.noise_std),
        "noise_bound": np.array(reg.noise_bound),
        "rkhs_bounds": reg.rkhs_bounds,
        "gamma": reg.gamma,
        "actions": np.array(reg.actions),
    }
    for action, model in reg.models.items():
        prefix = "action{a}_".format(a=action)
        arrays[prefix + "inputs"] = model.inputs
        arrays[prefix + "targets"] = model.targets
        arrays[prefix + "solve"] = model.solve
        arrays[prefix + "weights"] = model.weights
        arrays[prefix + "jitter"] = np.array(model.jitter)
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    return path


def load_regressor(path: Union[str, Path]) -> Regressor:
    """Read a regressor written by :func:`save_regressor`."""
    path = validate_file(path, "regressor")
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != REGRESSOR_FORMAT_VERSION:
            raise ValueError(
                "Unsupported regressor format version {v}.".format(v=version)
            )
        feature_map = str(archive["feature_map"])
        kernel = KernelSpec(
            signal_variance=float(archive["signal_variance"]),
            lengthscale=float(archive["lengthscale"]),
            feature_map=FeatureMap.from_dict(json.loads(feature_map))
            if feature_map
            else None,
        )
        models = {}
        for action in archive["actions"].tolist():
            prefix = "action{a}_".format(a=action)
            inputs = archive[prefix + "inputs"]
            models[int(action)] = ActionModel(
                inputs=inputs,
                features=kernel.features(inputs),
                targets=archive[prefix + "targets"],
                solve=archive[prefix + "solve"],
                weights=archive[prefix + "weights"],
                jitter=float(archive[prefix + "jitter"]),
            )
        return Regressor(
            kernel=kernel,
            noise_std=float(archive["noise_std"]),
            noise_bound=float(archive["noise_bound"]),
            rkhs_bounds=archive["rkhs_bounds"],
            gamma=archive["gamma"],
            models=models,
        )
