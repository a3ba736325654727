"""Two-factor probabilistic LDA with diagonal residual covariance.

A session vector decomposes as mean + speaker component + channel
component + residual, with the speaker factor shared by all sessions of a
speaker.  Training runs EM with the exact joint posterior over each
speaker's stacked latent variables; verification scores are the log ratio
of the same-speaker joint density against the independent marginals.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, DimensionMismatch, TooFewSpeakers
from .efr import apply_norm_stages, fit_norm_stages

RESIDUAL_FLOOR = 1e-10
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PldaModel:
    """Gaussian factor model of session vectors.

    mean: (dim,) global offset.
    speaker_loading: (dim, q_speaker) between-speaker subspace.
    channel_loading: (dim, q_channel) within-speaker subspace.
    residual_var: (dim,) diagonal residual variances, floored positive.
    """

    mean: np.ndarray
    speaker_loading: np.ndarray
    channel_loading: np.ndarray
    residual_var: np.ndarray
    loglik_history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def q_speaker(self):
        return self.speaker_loading.shape[1]

    @property
    def q_channel(self):
        return self.channel_loading.shape[1]

    def total_covariance(self):
        return (
            self.speaker_loading @ self.speaker_loading.T
            + self.channel_loading @ self.channel_loading.T
            + np.diag(self.residual_var)
        )

    def across_covariance(self):
        return self.speaker_loading @ self.speaker_loading.T


def plda_preprocess(vectors, labels=None, iterations=2):
    """Whiten and length-normalize vectors for factor training.

    Returns the transformed vectors and the fitted stages; the same stages
    must be applied to every vector scored against the resulting model.
    """
    del labels  # stages are global; the argument mirrors the other fits
    return fit_norm_stages(vectors, iterations=iterations)


def _orthonormal_columns(rng, dim, q):
    if q == 0:
        return np.zeros((dim, 0))
    m = rng.standard_normal((dim, max(q, 1)))
    qmat, _ = np.linalg.qr(m)
    return qmat[:, :q]


def _group_by_label(labels):
    labels = np.asarray(labels)
    groups = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(lab, []).append(idx)
    return {lab: np.array(rows) for lab, rows in groups.items()}


def fit_plda(vectors, labels, q_speaker, q_channel, iters=20, seed=0):
    """Maximum-likelihood factor fit with exact per-speaker posteriors.

    The loadings start from seeded random orthonormal matrices scaled to
    the average data spread; residual variances start at the per-dimension
    data variance.  The mean is fixed at the training mean.  Exactly
    `iters` EM updates are run; the marginal log-likelihood of each
    intermediate model is recorded.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("expected (count, dim) vectors")
    n, dim = x.shape
    if len(labels) != n:
        raise DimensionMismatch("labels and vectors disagree in length")
    if not (0 <= q_speaker <= dim) or not (0 <= q_channel <= dim):
        raise DimensionError(
            "factor dims (%d, %d) out of range for dim %d" % (q_speaker, q_channel, dim)
        )
    groups = _group_by_label(labels)
    if len(groups) < 2:
        raise TooFewSpeakers("need at least 2 speakers, have %d" % len(groups))
    if max(len(rows) for rows in groups.values()) < 2:
        raise ValueError("need at least one speaker with two or more sessions")

    mean = x.mean(axis=0)
    centered = x - mean
    rng = np.random.Generator(np.random.PCG64(seed))
    scale = float(np.sqrt(np.mean(centered.var(axis=0)) + RESIDUAL_FLOOR))
    voice = _orthonormal_columns(rng, dim, q_speaker) * scale
    channel = _orthonormal_columns(rng, dim, q_channel) * scale
    residual = np.maximum(centered.var(axis=0), RESIDUAL_FLOOR)

    model = PldaModel(mean, voice, channel, residual)
    history = [plda_loglik(model, x, labels)]
    by_count = {}
    for rows in groups.values():
        by_count.setdefault(len(rows), []).append(rows)

    for _ in range(iters):
        voice, channel, residual = _em_update(centered, by_count, voice, channel, residual)
        model = PldaModel(mean, voice, channel, residual, loglik_history=history)
        history.append(plda_loglik(model, x, labels))
    return model


def _em_update(centered, by_count, voice, channel, residual):
    dim = centered.shape[1]
    qs = voice.shape[1]
    qc = channel.shape[1]
    q = qs + qc
    inv_res = 1.0 / residual

    # Channel-factor posterior pieces shared across speakers.
    ch_inf = channel.T * inv_res  # (qc, dim), channel^T residual^-1
    m_ch = np.eye(qc) + ch_inf @ channel
    m_ch_inv = scipy.linalg.inv(m_ch) if qc else np.zeros((0, 0))
    # Within-session covariance inverse action via the low-rank identity.
    def within_inv_mult(mat):  # mat: (dim, k)
        base = inv_res[:, None] * mat
        if qc == 0:
            return base
        return base - (ch_inf.T @ (m_ch_inv @ (ch_inf @ mat)))

    w_voice = within_inv_mult(voice)  # (dim, qs)
    gram_y = voice.T @ w_voice  # (qs, qs)
    cross = m_ch_inv @ (ch_inf @ voice) if qc else np.zeros((0, qs))  # (qc, qs)

    r1 = np.zeros((dim, q))
    r2 = np.zeros((q, q))
    n_total = 0
    for count, speaker_rows in by_count.items():
        p_y = np.eye(qs) + count * gram_y
        p_y_inv = scipy.linalg.inv(p_y) if qs else np.zeros((0, 0))
        for rows in speaker_rows:
            obs = centered[rows]  # (count, dim)
            sums = obs.sum(axis=0)
            y_hat = p_y_inv @ (w_voice.T @ sums)  # (qs,)
            z_hat = (ch_inf @ obs.T).T @ m_ch_inv.T - y_hat @ cross.T if qc else np.zeros((count, 0))
            # First-order accumulators.
            r1[:, :qs] += np.outer(sums, y_hat)
            r1[:, qs:] += obs.T @ z_hat
            # Second-order accumulators from the exact joint posterior.
            cov_y = p_y_inv
            r2[:qs, :qs] += count * (cov_y + np.outer(y_hat, y_hat))
            if qc:
                z_sum = z_hat.sum(axis=0)
                cov_yz = -cov_y @ cross.T  # (qs, qc), same for every session
                r2[:qs, qs:] += count * cov_yz + np.outer(y_hat, z_sum)
                r2[qs:, :qs] += count * cov_yz.T + np.outer(z_sum, y_hat)
                cov_z = m_ch_inv + cross @ cov_y @ cross.T
                r2[qs:, qs:] += count * cov_z + z_hat.T @ z_hat
            n_total += count

    second_diag = np.sum(centered**2, axis=0)
    if q:
        loadings = scipy.linalg.solve(r2.T, r1.T, assume_a="gen").T
        new_voice = loadings[:, :qs]
        new_channel = loadings[:, qs:]
        new_residual = (second_diag - np.sum(loadings * r1, axis=1)) / n_total
    else:
        new_voice, new_channel = voice, channel
        new_residual = second_diag / n_total
    return new_voice, new_channel, np.maximum(new_residual, RESIDUAL_FLOOR)


def plda_loglik(model, vectors, labels):
    """Exact marginal log-likelihood of a labeled vector set.

    For a speaker with n sessions the stacked covariance has diagonal
    blocks total and off-diagonal blocks across; its determinant and
    inverse follow from the shared-factor structure, so no stacked matrix
    is formed.
    """
    x = np.asarray(vectors, dtype=np.float64)
    centered = x - model.mean
    groups = _group_by_label(labels)
    within = (
        model.channel_loading @ model.channel_loading.T + np.diag(model.residual_var)
    )
    across = model.across_covariance()
    dim = model.dim

    chol_within = scipy.linalg.cho_factor(within)
    logdet_within = 2.0 * float(np.sum(np.log(np.diag(chol_within[0]))))

    cache = {}
    total = 0.0
    for rows in groups.values():
        count = len(rows)
        if count not in cache:
            pooled = within + count * across
            chol_pooled = scipy.linalg.cho_factor(pooled)
            logdet_pooled = 2.0 * float(np.sum(np.log(np.diag(chol_pooled[0]))))
            cache[count] = (chol_pooled, logdet_pooled)
        chol_pooled, logdet_pooled = cache[count]
        obs = centered[rows]
        sums = obs.sum(axis=0)
        quad = float(np.sum(obs * scipy.linalg.cho_solve(chol_within, obs.T).T))
        # Correction couples the session sum through the pooled covariance:
        # the stacked inverse is I x within^-1 minus ones x
        # pooled^-1 across within^-1.
        half = scipy.linalg.cho_solve(chol_within, sums)
        quad -= float(scipy.linalg.cho_solve(chol_pooled, sums) @ (across @ half))
        logdet = (count - 1) * logdet_within + logdet_pooled
        total += -0.5 * (count * dim * LOG_2PI + logdet + quad)
    return total


@dataclass
class PldaScorer:
    """Precomputed factorizations for log-likelihood-ratio scoring."""

    mean: np.ndarray
    chol_total: tuple
    chol_sum: tuple
    chol_diff: tuple
    logdet_total: float
    logdet_sum: float
    logdet_diff: float

    @property
    def dim(self):
        return self.mean.shape[0]


def build_scorer(model):
    total = model.total_covariance()
    across = model.across_covariance()
    chol_total = scipy.linalg.cho_factor(total)
    chol_sum = scipy.linalg.cho_factor(total + across)
    chol_diff = scipy.linalg.cho_factor(total - across)
    logdet = lambda c: 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return PldaScorer(
        mean=model.mean.copy(),
        chol_total=chol_total,
        chol_sum=chol_sum,
        chol_diff=chol_diff,
        logdet_total=logdet(chol_total),
        logdet_sum=logdet(chol_sum),
        logdet_diff=logdet(chol_diff),
    )


def plda_score(scorer, a, b):
    """Log ratio of same-speaker joint density to independent marginals.

    Evaluated in sum/difference coordinates, where the joint covariance is
    block diagonal; the construction is symmetric in the two inputs.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (scorer.dim,) or b.shape != (scorer.dim,):
        raise DimensionMismatch("scored vectors must match the scorer dimension")
    xa = a - scorer.mean
    xb = b - scorer.mean
    s = (xa + xb) / np.sqrt(2.0)
    d = (xa - xb) / np.sqrt(2.0)
    quad_joint = float(s @ scipy.linalg.cho_solve(scorer.chol_sum, s)) + float(
        d @ scipy.linalg.cho_solve(scorer.chol_diff, d)
    )
    quad_marg = float(xa @ scipy.linalg.cho_solve(scorer.chol_total, xa)) + float(
        xb @ scipy.linalg.cho_solve(scorer.chol_total, xb)
    )
    logdet_joint = scorer.logdet_sum + scorer.logdet_diff
    return -0.5 * (logdet_joint - 2.0 * scorer.logdet_total + quad_joint - quad_marg)
