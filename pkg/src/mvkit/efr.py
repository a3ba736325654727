"""Iterative whitening plus length normalization, and the within-speaker
Mahalanobis score used on the normalized vectors.

Each normalization stage subtracts the training mean, multiplies by the
inverse square root of the training covariance, and scales the result to
unit length.  Stages are fitted sequentially: stage k sees the output of
stages 1..k-1.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularCovariance, ZeroVector

EIGENVALUE_FLOOR = 1e-10  # relative to the largest covariance eigenvalue
ZERO_NORM = 1e-300


@dataclass
class NormStage:
    """One whitening stage: centering mean and symmetric whitener."""

    mean: np.ndarray
    whitener: np.ndarray  # (dim, dim), inverse square root of covariance


@dataclass
class EfrModel:
    """Normalization stages plus the inverse within-speaker covariance."""

    stages: list
    within_inv: np.ndarray
    within_regularized: bool = False

    @property
    def dim(self):
        if self.stages:
            return self.stages[0].mean.shape[0]
        return self.within_inv.shape[0]


def _inv_sqrt_psd(matrix, context):
    """Symmetric inverse square root with eigenvalue flooring."""
    evals, evecs = scipy.linalg.eigh(matrix)
    top = evals[-1]
    if not np.isfinite(top) or top <= 0.0:
        raise SingularCovariance("%s covariance has no positive eigenvalues" % context)
    floored = np.maximum(evals, EIGENVALUE_FLOOR * top)
    return (evecs / np.sqrt(floored)) @ evecs.T


def _normalize_rows(rows, means_removed):
    norms = np.linalg.norm(means_removed, axis=1)
    if np.any(norms < ZERO_NORM):
        raise ZeroVector("a vector coincides with the stage mean")
    return means_removed / norms[:, None]


def fit_norm_stages(vectors, iterations=2):
    """Fit whitening/length-normalization stages; returns the transformed
    training vectors along with the stage parameters."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("expected (count, dim) vectors")
    stages = []
    for _ in range(iterations):
        mean = x.mean(axis=0)
        cov = np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
        whitener = _inv_sqrt_psd(cov, "training")
        stages.append(NormStage(mean=mean, whitener=whitener))
        x = _normalize_rows(x, (x - mean) @ whitener)
    return x, stages


def apply_norm_stages(stages, vectors):
    """Apply fitted stages to one vector or a batch."""
    v = np.asarray(vectors, dtype=np.float64)
    single = v.ndim == 1
    x = v[None, :] if single else v
    if x.shape[1] != stages[0].mean.shape[0]:
        raise DimensionMismatch(
            "vector dim %d does not match stages dim %d"
            % (x.shape[1], stages[0].mean.shape[0])
        )
    for stage in stages:
        centered = x - stage.mean
        norms_in = np.linalg.norm(centered, axis=1)
        if np.any(norms_in < ZERO_NORM):
            raise ZeroVector("a vector coincides with the stage mean")
        x = _normalize_rows(x, centered @ stage.whitener)
    return x[0] if single else x


def fit_efr(vectors, labels, iterations=2):
    """Fit normalization stages and the within-speaker metric.

    The within-speaker covariance pools per-session deviations from each
    speaker's mean over all speakers.  If it is singular beyond the
    eigenvalue floor, an isotropic ridge is substituted and the model is
    flagged as regularized.
    """
    normalized, stages = fit_norm_stages(vectors, iterations)
    labels = np.asarray(labels)
    if labels.shape[0] != normalized.shape[0]:
        raise DimensionMismatch("labels and vectors disagree in length")
    dim = normalized.shape[1]
    scatter = np.zeros((dim, dim))
    sessions = 0
    speakers = 0
    for spk in np.unique(labels):
        rows = normalized[labels == spk]
        speakers += 1
        sessions += rows.shape[0]
        r = rows - rows.mean(axis=0)
        scatter += r.T @ r
    denom = max(sessions - speakers, 1)
    within = scatter / denom

    regularized = False
    evals = np.linalg.eigvalsh(within)
    if evals[-1] <= 0.0 or evals[0] < EIGENVALUE_FLOOR * evals[-1]:
        ridge = max(EIGENVALUE_FLOOR * max(evals[-1], 0.0), 1e-10)
        within = within + ridge * np.eye(dim)
        regularized = True
    try:
        inv_sqrt = _inv_sqrt_psd(within, "within-speaker")
    except SingularCovariance:
        raise SingularCovariance(
            "within-speaker covariance is singular even after regularization"
        )
    within_inv = inv_sqrt @ inv_sqrt
    return EfrModel(stages=stages, within_inv=within_inv, within_regularized=regularized)


def efr_normalize(model, vectors):
    """Apply the model's stages to one vector or a batch."""
    return apply_norm_stages(model.stages, vectors)


def mahalanobis_score(model, a, b):
    """Negated within-speaker Mahalanobis distance between normalized
    vectors; larger means more same-speaker-like, zero only for identical
    inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.shape[-1] != model.dim:
        raise DimensionMismatch("scored vectors must share the model dimension")
    d = a - b
    return -float(d @ model.within_inv @ d)
