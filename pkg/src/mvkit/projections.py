"""Session-compensation projections: mean/variance normalization, PCA,
linear discriminant directions, and a probabilistic within-speaker
nuisance projector.

All fit functions take vectors of shape (count, dim); labels, where
required, are per-row speaker or class identifiers.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionError,
    DimensionMismatch,
    NoWithinSpeakerVariation,
    RankDeficient,
    TooFewClasses,
)

STD_FLOOR = 1e-12


def _as_matrix(vectors):
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionMismatch("expected (count, dim) vectors, got shape %r" % (vectors.shape,))
    return vectors


def _check_dim(v, dim):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != dim:
        raise DimensionMismatch("vector dim %d does not match model dim %d" % (v.shape[-1], dim))
    return v


def _fix_signs(basis):
    """Flip each column so its largest-magnitude entry is positive."""
    anchor = np.abs(basis).argmax(axis=0)
    signs = np.sign(basis[anchor, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


@dataclass
class MeanVarNorm:
    """Per-dimension standardization fitted on training vectors.

    Dimensions whose standard deviation falls below the floor are flagged
    in constant_dims and given unit scale, which maps them to zero.
    """

    mean: np.ndarray
    std: np.ndarray
    constant_dims: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]


def fit_meanvar(vectors):
    vectors = _as_matrix(vectors)
    if vectors.shape[0] < 2:
        raise ValueError("need at least 2 vectors to estimate spread")
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0, ddof=1)
    constant = std < STD_FLOOR
    std = np.where(constant, 1.0, std)
    return MeanVarNorm(mean=mean, std=std, constant_dims=constant)


def apply_meanvar(norm, vectors):
    vectors = _check_dim(vectors, norm.dim)
    return (vectors - norm.mean) / norm.std


@dataclass
class PcaModel:
    """Orthonormal principal directions, eigenvalues descending."""

    mean: np.ndarray
    basis: np.ndarray  # (dim, q)
    eigenvalues: np.ndarray  # (q,)

    @property
    def dim(self):
        return self.mean.shape[0]


def fit_pca(vectors, q):
    """Principal directions of the sample covariance (ddof=1)."""
    vectors = _as_matrix(vectors)
    n, dim = vectors.shape
    if not (1 <= q <= dim):
        raise RankDeficient("q=%d out of range for dim %d" % (q, dim))
    if n < 2:
        raise ValueError("need at least 2 vectors")
    mean = vectors.mean(axis=0)
    cov = np.cov(vectors, rowvar=False, ddof=1).reshape(dim, dim)
    evals, evecs = scipy.linalg.eigh(cov)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    rank = int(np.sum(evals > max(evals[0], 0.0) * 1e-10))
    if q > rank:
        raise RankDeficient("q=%d exceeds covariance rank %d" % (q, rank))
    basis = _fix_signs(evecs[:, :q])
    return PcaModel(mean=mean, basis=basis, eigenvalues=evals[:q].copy())


def project_pca(model, vectors):
    vectors = _check_dim(vectors, model.dim)
    return (vectors - model.mean) @ model.basis


@dataclass
class LdaModel:
    """Discriminant directions from the generalized eigenproblem
    between/within, descending eigenvalue order, within-scatter normalized."""

    mean: np.ndarray
    basis: np.ndarray  # (dim, q)
    eigenvalues: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]


def _class_scatters(vectors, labels):
    labels = np.asarray(labels)
    classes = np.unique(labels)
    dim = vectors.shape[1]
    mean = vectors.mean(axis=0)
    s_b = np.zeros((dim, dim))
    s_w = np.zeros((dim, dim))
    for c in classes:
        rows = vectors[labels == c]
        cm = rows.mean(axis=0)
        d = cm - mean
        s_b += rows.shape[0] * np.outer(d, d)
        r = rows - cm
        s_w += r.T @ r
    return mean, s_b, s_w, classes


def fit_lda(vectors, labels, q, ridge=1e-6):
    """Count-weighted between/within discriminant directions.

    The within scatter is stabilized with ridge * trace(S_w)/dim on the
    diagonal before the generalized symmetric eigensolve.
    """
    vectors = _as_matrix(vectors)
    if len(labels) != vectors.shape[0]:
        raise DimensionMismatch("labels and vectors disagree in length")
    dim = vectors.shape[1]
    if not (1 <= q <= dim):
        raise RankDeficient("q=%d out of range for dim %d" % (q, dim))
    mean, s_b, s_w, classes = _class_scatters(vectors, labels)
    if len(classes) < 2:
        raise TooFewClasses("need at least 2 classes, have %d" % len(classes))
    reg = s_w + (ridge * np.trace(s_w) / dim) * np.eye(dim)
    try:
        evals, evecs = scipy.linalg.eigh(s_b, reg)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise RankDeficient("within scatter is singular: %s" % exc) from exc
    rank = int(np.sum(evals > max(evals.max(), 0.0) * 1e-10))
    if q > rank:
        raise RankDeficient(
            "q=%d exceeds between-class rank %d (%d classes)" % (q, rank, len(classes))
        )
    order = np.argsort(evals)[::-1][:q]
    basis = _fix_signs(evecs[:, order])
    return LdaModel(mean=mean, basis=basis, eigenvalues=evals[order].copy())


def project_lda(model, vectors):
    vectors = _check_dim(vectors, model.dim)
    return (vectors - model.mean) @ model.basis


@dataclass
class PpcaNapModel:
    """Probabilistic within-speaker subspace with unit residual variance.

    loading: (dim, q) subspace matrix; posterior precision is
    I + loading^T loading.
    """

    loading: np.ndarray
    loglik_history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def dim(self):
        return self.loading.shape[0]

    @property
    def q(self):
        return self.loading.shape[1]

    def posterior_precision(self):
        q = self.loading.shape[1]
        return np.eye(q) + self.loading.T @ self.loading


def _speaker_centered(vectors, labels):
    """Center each speaker's rows on its own mean; drop single-session
    speakers, whose centered rows are identically zero."""
    labels = np.asarray(labels)
    chunks = []
    for spk in np.unique(labels):
        rows = vectors[labels == spk]
        if rows.shape[0] >= 2:
            chunks.append(rows - rows.mean(axis=0))
    if not chunks:
        raise NoWithinSpeakerVariation("no speaker has two or more sessions")
    return np.concatenate(chunks, axis=0)


def _ppca_estep(loading, centered):
    """Posterior latent means; precision is I + loading^T loading."""
    prec = np.eye(loading.shape[1]) + loading.T @ loading
    latent = scipy.linalg.solve(prec, loading.T @ centered.T, assume_a="pos").T
    return latent, prec


def _ppca_em_step(loading, centered):
    latent, prec = _ppca_estep(loading, centered)
    n = centered.shape[0]
    prec_inv = scipy.linalg.inv(prec)
    moment = n * prec_inv + latent.T @ latent
    return scipy.linalg.solve(moment.T, (centered.T @ latent).T).T


def _ppca_loglik(loading, centered):
    """Marginal log-likelihood of centered rows under N(0, LL^T + I)."""
    n, dim = centered.shape
    gram = loading.T @ loading
    evals = np.linalg.eigvalsh(gram) if gram.size else np.empty(0)
    logdet = float(np.sum(np.log1p(np.maximum(evals, 0.0))))
    prec = np.eye(loading.shape[1]) + gram
    proj = centered @ loading
    quad = float(np.sum(centered**2)) - float(
        np.sum(proj * scipy.linalg.solve(prec, proj.T, assume_a="pos").T)
    )
    return -0.5 * (n * dim * np.log(2.0 * np.pi) + n * logdet + quad)


def fit_ppca_nap(vectors, labels, q, iters=30):
    """Fit the within-speaker subspace by maximum likelihood.

    Runs exactly `iters` EM updates on speaker-centered vectors.  The
    loading is seeded from the top-q within-speaker principal directions
    scaled by their singular values; an all-zero seed would be a fixed
    point of the update and is never used.
    """
    vectors = _as_matrix(vectors)
    centered = _speaker_centered(vectors, labels)
    dim = vectors.shape[1]
    if not (1 <= q < dim):
        raise DimensionError("q=%d out of range for dim %d" % (q, dim))
    _, sing, vt = np.linalg.svd(centered, full_matrices=False)
    if int(np.sum(sing > sing[0] * 1e-12)) < q:
        raise RankDeficient("within-speaker variation has rank below q=%d" % q)
    loading = vt[:q].T * (sing[:q] / np.sqrt(centered.shape[0]))
    history = [_ppca_loglik(loading, centered)]
    for _ in range(iters):
        loading = _ppca_em_step(loading, centered)
        history.append(_ppca_loglik(loading, centered))
    return PpcaNapModel(loading=loading, loglik_history=history)


def nap_project(model, vectors):
    """Remove the expected within-speaker component: v - L E[y|v]."""
    vectors = _check_dim(vectors, model.dim)
    flat = vectors.reshape(-1, model.dim)
    latent, _ = _ppca_estep(model.loading, flat)
    out = flat - latent @ model.loading.T
    return out.reshape(vectors.shape)
