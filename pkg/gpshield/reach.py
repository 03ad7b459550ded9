"""
Sound enclosures of the learned mean dynamics and of the regression error over
boxes.

Every function has a single-box form mirroring the library surface and a
``batch_`` form working on arrays of box corners of shape (k, n), which the
abstraction uses.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .geometry import Box, split_bounds
from .gp import ActionModel, Regressor, check_confidence

logger = logging.getLogger(__name__)

MEAN_METHODS = ("interval", "taylor")
ERROR_METHODS = ("interval", "centered")


@dataclass(frozen=True, eq=False)
class IntervalVector:
    """Closed interval per dimension."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or np.any(lower > upper):
            message = "Invalid interval vector [{lo}, {hi}].".format(
                lo=lower, hi=upper
            )
            raise ValueError(message)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.all((points >= self.lower) & (points <= self.upper), axis=-1)

    def __add__(self, other: "IntervalVector") -> "IntervalVector":
        return IntervalVector(self.lower + other.lower, self.upper + other.upper)

    def to_box(self) -> Box:
        return Box(self.lower, self.upper)


def _box_features(
    reg: Regressor, lower: np.ndarray, upper: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    feature_map = reg.kernel.feature_map
    if feature_map is None:
        return lower, upper
    return feature_map.propagate(lower, upper)


def kernel_ranges(
    reg: Regressor, model: ActionModel, lower: np.ndarray, upper: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Enclosures of ``k(x, x_j)`` over boxes for every retained input.

    The squared distance between a box and a point is bounded by its exact
    minimum and maximum over the box (in feature space, where the box is first
    propagated through the feature map by interval arithmetic).

    Parameters
    ----------
    reg : Regressor
        Fitted regressor.
    model : ActionModel
        Per-action model holding the retained inputs.
    lower, upper : np.ndarray
        Box corners, shape (k, n).

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Lower and upper kernel values, each of shape (k, m).
    """
    flo, fhi = _box_features(reg, np.atleast_2d(lower), np.atleast_2d(upper))
    z = model.features[None, :, :]
    below = flo[:, None, :] - z
    above = z - fhi[:, None, :]
    nearest = np.maximum(np.maximum(below, above), 0.0)
    farthest = np.maximum(np.abs(below), np.abs(above))
    dmin = np.sum(nearest**2, axis=2)
    dmax = np.sum(farthest**2, axis=2)
    return reg.kernel.from_sqdist(dmax), reg.kernel.from_sqdist(dmin)


def kernel_range(
    reg: Regressor, action: int, box: Box, index: int
) -> Tuple[float, float]:
    """Enclosure of ``{k(x, x_j) : x in box}`` for one retained input ``x_j``."""
    model = reg.model(action)
    if not 0 <= index < model.size:
        raise ValueError(
            "Data index {j} out of range [0, {m}).".format(j=index, m=model.size)
        )
    lo, hi = kernel_ranges(reg, model, box.lower[None, :], box.upper[None, :])
    return float(lo[0, index]), float(hi[0, index])


def _weighted_sum(klo, khi, weights):
    positive = np.maximum(weights, 0.0)
    negative = np.minimum(weights, 0.0)
    lower = klo @ positive + khi @ negative
    upper = khi @ positive + klo @ negative
    return lower, upper


def _taylor_mean_bounds(
    reg: Regressor, model: ActionModel, lower: np.ndarray, upper: np.ndarray, klo, khi
):
    """
    Second-order enclosure around the box centre for the base kernel:
    ``mu(c) +- (sum_i |d_i mu(c)| r_i + 1/2 sum_ik M_ik r_i r_k)`` where ``M``
    bounds the Hessian entries over the box.
    """
    ell2 = reg.kernel.lengthscale**2
    z = model.inputs[None, :, :]
    weights = model.weights
    center = 0.5 * (lower + upper)
    radius = 0.5 * (upper - lower)

    diff = center[:, None, :] - z
    kc = reg.kernel.from_sqdist(np.sum(diff**2, axis=2))
    mean_c = kc @ weights
    gradient = -np.einsum("bj,jo,bji->boi", kc, weights, diff) / ell2
    linear = np.einsum("boi,bi->bo", np.abs(gradient), radius)

    dlo = lower[:, None, :] - z
    dhi = upper[:, None, :] - z
    # d_i d_k over the box, with the exact square range on the diagonal.
    products = np.stack(
        [
            dlo[..., :, None] * dlo[..., None, :],
            dlo[..., :, None] * dhi[..., None, :],
            dhi[..., :, None] * dlo[..., None, :],
            dhi[..., :, None] * dhi[..., None, :],
        ]
    )
    plo = products.min(axis=0)
    phi = products.max(axis=0)
    n = lower.shape[1]
    diag = np.arange(n)
    crosses_zero = (dlo <= 0) & (dhi >= 0)
    sq_hi = np.maximum(dlo**2, dhi**2)
    sq_lo = np.where(crosses_zero, 0.0, np.minimum(dlo**2, dhi**2))
    plo[..., diag, diag] = sq_lo
    phi[..., diag, diag] = sq_hi

    identity = np.eye(n) / ell2
    tlo = plo / ell2**2 - identity
    thi = phi / ell2**2 - identity
    # kernel factor is nonnegative
    klo4 = klo[:, :, None, None]
    khi4 = khi[:, :, None, None]
    hlo = np.minimum(klo4 * tlo, khi4 * tlo)
    hhi = np.maximum(klo4 * thi, khi4 * thi)

    positive = np.maximum(weights, 0.0)
    negative = np.minimum(weights, 0.0)
    sum_lo = np.einsum("bjik,jo->boik", hlo, positive) + np.einsum(
        "bjik,jo->boik", hhi, negative
    )
    sum_hi = np.einsum("bjik,jo->boik", hhi, positive) + np.einsum(
        "bjik,jo->boik", hlo, negative
    )
    bound = np.maximum(np.abs(sum_lo), np.abs(sum_hi))
    quadratic = 0.5 * np.einsum("boik,bi,bk->bo", bound, radius, radius)
    spread = linear + quadratic
    return mean_c - spread, mean_c + spread


def batch_mean_bounds(
    reg: Regressor,
    action: int,
    lower: np.ndarray,
    upper: np.ndarray,
    method: str = "interval",
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Enclosures of the posterior mean over many boxes.

    Parameters
    ----------
    reg : Regressor
        Fitted regressor.
    action : int
        Action.
    lower, upper : np.ndarray
        Box corners, shape (k, n).
    method : str, optional
        "interval" (sign-aware sum of kernel ranges) or "taylor" (base kernel
        only; intersected with the interval enclosure), by default "interval".

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Lower and upper mean bounds, shape (k, n).
    """
    if method not in MEAN_METHODS:
        raise ValueError(
            "Unknown mean enclosure '{m}', expected one of {known}.".format(
                m=method, known=MEAN_METHODS
            )
        )
    model = reg.model(action)
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    klo, khi = kernel_ranges(reg, model, lower, upper)
    mlo, mhi = _weighted_sum(klo, khi, model.weights)
    if method == "taylor":
        if reg.kernel.feature_map is not None:
            raise ValueError("The taylor enclosure supports the base kernel only.")
        tlo, thi = _taylor_mean_bounds(reg, model, lower, upper, klo, khi)
        mlo = np.maximum(mlo, tlo)
        mhi = np.minimum(mhi, thi)
        mhi = np.maximum(mhi, mlo)
    return mlo, mhi


def mean_bounds(
    reg: Regressor, action: int, box: Box, method: str = "interval"
) -> IntervalVector:
    """
    Enclosure of ``{mu(x) : x in box}`` per output dimension.
    """
    if box.is_empty:
        raise ValueError("Mean bounds need a nonempty box.")
    lo, hi = batch_mean_bounds(reg, action, box.lower[None], box.upper[None], method)
    return IntervalVector(lo[0], hi[0])


def post(
    reg: Regressor, action: int, box: Box, noise_cell: Box, method: str = "interval"
) -> Box:
    """
    Over-approximation of the one-step image of *box* under the mean dynamics
    plus a noise cell (interval Minkowski sum).
    """
    bounds = mean_bounds(reg, action, box, method)
    return Box(bounds.lower + noise_cell.lower, bounds.upper + noise_cell.upper)


def _quadratic_lower(
    solve: np.ndarray, klo: np.ndarray, khi: np.ndarray, kc: np.ndarray, method: str
) -> np.ndarray:
    """
    Lower bound of ``k^T G k`` for ``klo <= k <= khi`` (k nonnegative).

    With ``G = G+ + G-`` split by sign, ``k^T G+ k`` is nondecreasing and
    ``k^T G- k`` nonincreasing in every entry of a nonnegative k, which gives
    the "interval" bound. The "centered" bound expands around ``kc``:
    ``k^T G k >= kc^T G kc + 2 min_d (G kc)^T d`` since ``d^T G d >= 0``.
    Both are clamped at 0, the trivial bound.
    """
    positive = np.maximum(solve, 0.0)
    negative = np.minimum(solve, 0.0)
    bound = np.sum((klo @ positive) * klo, axis=1) + np.sum(
        (khi @ negative) * khi, axis=1
    )
    if method == "centered":
        gkc = kc @ solve
        dlo = klo - kc
        dhi = khi - kc
        linear = np.sum(np.minimum(gkc * dlo, gkc * dhi), axis=1)
        bound = np.maximum(bound, np.sum(gkc * kc, axis=1) + 2.0 * linear)
    return np.maximum(bound, 0.0)


def _error_bounds_once(reg, model, lower, upper, delta, method):
    klo, khi = kernel_ranges(reg, model, lower, upper)
    kc = None
    if method == "centered":
        center = 0.5 * (lower + upper)
        features = reg.kernel.features(center)
        kc = reg.kernel.from_sqdist(
            np.sum((features[:, None, :] - model.features[None]) ** 2, axis=2)
        )
    quad = _quadratic_lower(model.solve, klo, khi, kc, method)
    prior = reg.kernel.signal_variance
    variance = np.clip(prior - quad, 0.0, prior)
    # G k lies in [G+ klo + G- khi, G+ khi + G- klo] componentwise, so
    # |G k|^2 <= sum_j max(lo_j^2, hi_j^2) and lambda <= 4 sigma_v^2 times that.
    positive = np.maximum(model.solve, 0.0)
    negative = np.minimum(model.solve, 0.0)
    gk_lo = klo @ positive + khi @ negative
    gk_hi = khi @ positive + klo @ negative
    norm2 = np.sum(np.maximum(gk_lo**2, gk_hi**2), axis=1)
    lam = 4.0 * reg.noise_bound**2 * norm2
    return np.sqrt(variance)[:, None] * reg.beta + np.sqrt(
        0.5 * lam[:, None] * np.log(2.0 / delta)
    )


def batch_sup_error_bound(
    reg: Regressor,
    action: int,
    lower: np.ndarray,
    upper: np.ndarray,
    delta,
    method: str = "interval",
    subdivisions: int = 1,
) -> np.ndarray:
    """
    Upper bounds on ``sup_{x in box} eps(x, delta)`` for many boxes.

    Parameters
    ----------
    reg : Regressor
        Fitted regressor.
    action : int
        Action.
    lower, upper : np.ndarray
        Box corners, shape (k, n).
    delta : float or array_like
        Confidence in (0, 1), scalar or per output dimension.
    method : str, optional
        Quadratic form bound, "interval" or "centered", by default "interval".
    subdivisions : int, optional
        Pieces per dimension each box is split into before bounding, by
        default 1.

    Returns
    -------
    np.ndarray
        Shape (k, n).
    """
    if method not in ERROR_METHODS:
        raise ValueError(
            "Unknown error bound method '{m}', expected one of {known}.".format(
                m=method, known=ERROR_METHODS
            )
        )
    delta = check_confidence(delta)
    model = reg.model(action)
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    if subdivisions == 1:
        return _error_bounds_once(reg, model, lower, upper, delta, method)
    sub_lower, sub_upper = _subdivide(lower, upper, subdivisions)
    eps = _error_bounds_once(reg, model, sub_lower, sub_upper, delta, method)
    return eps.reshape(lower.shape[0], -1, eps.shape[1]).max(axis=1)


def sup_error_bound(
    reg: Regressor,
    action: int,
    box: Box,
    delta,
    method: str = "interval",
    subdivisions: int = 1,
) -> np.ndarray:
    """Upper bound on the largest uniform error bound over *box*."""
    if box.is_empty:
        raise ValueError("Error bounds need a nonempty box.")
    eps = batch_sup_error_bound(
        reg, action, box.lower[None], box.upper[None], delta, method, subdivisions
    )
    return eps[0]


def _subdivide(lower: np.ndarray, upper: np.ndarray, subdivisions: int):
    if subdivisions < 1:
        raise ValueError(
            "Subdivisions must be >= 1, got {s}.".format(s=subdivisions)
        )
    pieces = [split_bounds(lo, hi, subdivisions) for lo, hi in zip(lower, upper)]
    sub_lower = np.concatenate([p[0] for p in pieces])
    sub_upper = np.concatenate([p[1] for p in pieces])
    return sub_lower, sub_upper


def batch_post_bounds(
    reg: Regressor,
    action: int,
    lower: np.ndarray,
    upper: np.ndarray,
    method: str = "interval",
    subdivisions: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean enclosures over many boxes, each the hull over its sub-boxes.

    Add noise cell corners to obtain Post boxes.
    """
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    if subdivisions == 1:
        return batch_mean_bounds(reg, action, lower, upper, method)
    sub_lower, sub_upper = _subdivide(lower, upper, subdivisions)
    mlo, mhi = batch_mean_bounds(reg, action, sub_lower, sub_upper, method)
    k = lower.shape[0]
    return (
        mlo.reshape(k, -1, mlo.shape[1]).min(axis=1),
        mhi.reshape(k, -1, mhi.shape[1]).max(axis=1),
    )
