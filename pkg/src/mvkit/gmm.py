"""Diagonal-covariance Gaussian mixtures and sufficient statistics.

The universal background model (UBM) used throughout the toolkit is a
diagonal-covariance mixture trained with expectation maximization.  Frames
are plain float arrays of shape (frames, dim).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDimension, DimensionMismatch, TooFewFrames


@dataclass
class UbmConfig:
    """Training schedule for train_ubm."""

    max_em_iters: int = 50
    var_floor_fraction: float = 1e-3
    seed: int = 0


@dataclass
class DiagonalGmm:
    """Mixture weights plus per-component diagonal Gaussians.

    weights: (components,), nonnegative, sums to one.
    means: (components, dim).
    variances: (components, dim), strictly positive.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    loglik_history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def num_components(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def validate(self):
        assert self.weights.shape == (self.num_components,)
        assert self.variances.shape == self.means.shape
        assert np.all(self.variances > 0)
        assert abs(self.weights.sum() - 1.0) < 1e-10


@dataclass
class GmmStats:
    """Zeroth and first order sufficient statistics.

    occupancy: (components,) posterior mass per component.
    first_order: (components, dim) responsibility-weighted frame sums.
    """

    occupancy: np.ndarray
    first_order: np.ndarray
    frame_count: int


def _check_frames(frames, dim=None):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise DimensionMismatch("expected a (frames, dim) array, got shape %r" % (frames.shape,))
    if not np.isfinite(frames).all():
        raise DimensionMismatch("frames contain non-finite values")
    if dim is not None and frames.shape[1] != dim:
        raise DimensionMismatch(
            "frame dim %d does not match model dim %d" % (frames.shape[1], dim)
        )
    return frames


def _log_gauss(frames, means, variances, weights=None):
    """Per-frame per-component log density, shape (frames, components).

    Expands the diagonal quadratic form into three matrix products so no
    (frames, components, dim) intermediate is materialized.
    """
    inv = 1.0 / variances
    quad = (
        frames**2 @ inv.T
        - 2.0 * (frames @ (means * inv).T)
        + np.sum(means**2 * inv, axis=1)
    )
    log_norm = -0.5 * (means.shape[1] * np.log(2.0 * np.pi) + np.sum(np.log(variances), axis=1))
    out = -0.5 * quad + log_norm
    if weights is not None:
        out += np.log(weights)
    return out


def _log_resp(frames, means, variances, weights):
    """Log responsibilities and per-frame total log-likelihood."""
    joint = _log_gauss(frames, means, variances, weights)
    peak = joint.max(axis=1, keepdims=True)
    norm = peak[:, 0] + np.log(np.exp(joint - peak).sum(axis=1))
    return joint - norm[:, None], norm


def _kmeanspp_centers(frames, count, rng):
    """k-means++ seeding: spread initial centers over the data."""
    n = frames.shape[0]
    centers = np.empty((count, frames.shape[1]))
    centers[0] = frames[rng.integers(n)]
    d2 = np.sum((frames - centers[0]) ** 2, axis=1)
    for k in range(1, count):
        total = d2.sum()
        if total <= 0.0:
            raise TooFewFrames(
                "fewer than %d distinct frames available for seeding" % count
            )
        centers[k] = frames[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((frames - centers[k]) ** 2, axis=1))
    return centers


def train_ubm(frames, num_components, config=None):
    """Fit a diagonal GMM to pooled frames with EM.

    Initialization is k-means++ seeding from the data (seeded by
    config.seed); variances start at the global per-dimension variance and
    weights start uniform.  Variances are floored at
    var_floor_fraction times the global variance throughout.
    """
    config = config or UbmConfig()
    frames = _check_frames(frames)
    n, dim = frames.shape
    if n < num_components:
        raise TooFewFrames("have %d frames, need at least %d" % (n, num_components))
    global_var = frames.var(axis=0)
    if np.any(global_var <= 0.0):
        dead = int(np.argmin(global_var))
        raise DegenerateDimension("feature dimension %d has zero variance" % dead)
    floor = config.var_floor_fraction * global_var

    rng = np.random.Generator(np.random.PCG64(config.seed))
    means = _kmeanspp_centers(frames, num_components, rng)
    variances = np.tile(global_var, (num_components, 1))
    weights = np.full(num_components, 1.0 / num_components)

    history = []
    for _ in range(config.max_em_iters):
        log_r, frame_ll = _log_resp(frames, means, variances, weights)
        history.append(float(frame_ll.sum()))
        resp = np.exp(log_r)
        occ = resp.sum(axis=0)
        safe = occ > 1e-12
        first = resp.T @ frames
        second = resp.T @ (frames**2)
        new_means = np.where(safe[:, None], first / np.where(safe, occ, 1.0)[:, None], means)
        new_var = np.where(
            safe[:, None],
            second / np.where(safe, occ, 1.0)[:, None] - new_means**2,
            variances,
        )
        means = new_means
        variances = np.maximum(new_var, floor)
        weights = occ / n
        if len(history) >= 2:
            prev, cur = history[-2], history[-1]
            if abs(cur - prev) <= 1e-12 * max(1.0, abs(prev)):
                break
    gmm = DiagonalGmm(weights, means, variances, loglik_history=history)
    gmm.validate()
    return gmm


def responsibilities(gmm, frame):
    """Posterior component probabilities for one frame.

    Computed in the log domain with max subtraction, so the result sums to
    one even for extreme likelihood spreads.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (gmm.dim,):
        raise DimensionMismatch(
            "frame shape %r does not match model dim %d" % (frame.shape, gmm.dim)
        )
    log_r, _ = _log_resp(frame[None, :], gmm.means, gmm.variances, gmm.weights)
    return np.exp(log_r[0])


def accumulate_stats(gmm, frames):
    """Accumulate occupancy and first-order statistics over frames."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.size == 0:
        return GmmStats(
            occupancy=np.zeros(gmm.num_components),
            first_order=np.zeros((gmm.num_components, gmm.dim)),
            frame_count=0,
        )
    frames = _check_frames(frames, gmm.dim)
    log_r, _ = _log_resp(frames, gmm.means, gmm.variances, gmm.weights)
    resp = np.exp(log_r)
    return GmmStats(
        occupancy=resp.sum(axis=0),
        first_order=resp.T @ frames,
        frame_count=frames.shape[0],
    )
