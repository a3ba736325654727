"""Standardization, PCA, LDA, and the probabilistic nuisance subspace."""

import numpy as np
import pytest
import scipy.linalg

from mvkit.errors import (
    DimensionError,
    NoWithinSpeakerVariation,
    RankDeficient,
    TooFewClasses,
)
from mvkit.projections import (
    _ppca_estep,
    apply_meanvar,
    fit_lda,
    fit_meanvar,
    fit_pca,
    fit_ppca_nap,
    nap_project,
    project_lda,
    project_pca,
)


def _labeled_gaussians(rng, speakers, sessions, dim, between=3.0, within=1.0):
    means = between * rng.standard_normal((speakers, dim))
    vectors, labels = [], []
    for s in range(speakers):
        vectors.append(means[s] + within * rng.standard_normal((sessions, dim)))
        labels += ["spk%03d" % s] * sessions
    return np.vstack(vectors), np.array(labels)


class TestMeanVar:
    def test_standardizes(self):
        rng = np.random.default_rng(20)
        v = rng.normal(5.0, 3.0, size=(200, 6))
        norm = fit_meanvar(v)
        out = apply_meanvar(norm, v)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=0, ddof=1), 1.0, atol=1e-12)

    def test_constant_dimension(self):
        rng = np.random.default_rng(21)
        v = rng.standard_normal((50, 3))
        v[:, 1] = 4.0
        norm = fit_meanvar(v)
        assert norm.constant_dims.tolist() == [False, True, False]
        out = apply_meanvar(norm, v)
        np.testing.assert_array_equal(out[:, 1], 0.0)

    def test_single_vector_apply(self):
        rng = np.random.default_rng(22)
        v = rng.standard_normal((30, 4))
        norm = fit_meanvar(v)
        one = apply_meanvar(norm, v[0])
        np.testing.assert_allclose(one, apply_meanvar(norm, v)[0])


class TestPca:
    def test_matches_direct_eigendecomposition(self):
        rng = np.random.default_rng(23)
        v = rng.standard_normal((300, 5)) * np.array([5.0, 3.0, 2.0, 1.0, 0.5])
        model = fit_pca(v, 3)
        evals, evecs = np.linalg.eigh(np.cov(v, rowvar=False, ddof=1))
        np.testing.assert_allclose(model.eigenvalues, evals[::-1][:3], rtol=1e-10)
        for k in range(3):
            ref = evecs[:, ::-1][:, k]
            got = model.basis[:, k]
            # same direction up to sign
            assert min(np.linalg.norm(got - ref), np.linalg.norm(got + ref)) < 1e-10

    def test_projection_decorrelates(self):
        rng = np.random.default_rng(24)
        mix = rng.standard_normal((6, 6))
        v = rng.standard_normal((500, 6)) @ mix
        model = fit_pca(v, 6)
        proj = project_pca(model, v)
        cov = np.cov(proj, rowvar=False, ddof=1)
        np.testing.assert_allclose(cov, np.diag(model.eigenvalues), atol=1e-8)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(25)
        v = rng.standard_normal((100, 4))
        a = fit_pca(v, 4)
        b = fit_pca(v.copy(), 4)
        np.testing.assert_array_equal(a.basis, b.basis)
        # largest-magnitude entry of each column is positive
        for k in range(4):
            col = a.basis[:, k]
            assert col[np.argmax(np.abs(col))] > 0

    def test_rank_deficient(self):
        rng = np.random.default_rng(26)
        thin = rng.standard_normal((4, 8))  # rank <= 3 covariance
        with pytest.raises(RankDeficient):
            fit_pca(thin, 5)

    def test_q_out_of_range(self):
        with pytest.raises(RankDeficient):
            fit_pca(np.eye(3), 4)


class TestLda:
    def test_two_class_matches_fisher_direction(self):
        rng = np.random.default_rng(27)
        v, labels = _labeled_gaussians(rng, 2, 200, 3, between=4.0)
        model = fit_lda(v, labels, 1, ridge=0.0)
        mu = [v[labels == s].mean(axis=0) for s in np.unique(labels)]
        sw = sum(
            (v[labels == s] - m).T @ (v[labels == s] - m)
            for s, m in zip(np.unique(labels), mu)
        )
        fisher = scipy.linalg.solve(sw, mu[0] - mu[1])
        fisher /= np.linalg.norm(fisher)
        got = model.basis[:, 0] / np.linalg.norm(model.basis[:, 0])
        assert min(np.linalg.norm(got - fisher), np.linalg.norm(got + fisher)) < 1e-8

    def test_orders_by_separation(self):
        rng = np.random.default_rng(28)
        v, labels = _labeled_gaussians(rng, 6, 40, 8)
        model = fit_lda(v, labels, 5)
        assert (np.diff(model.eigenvalues) <= 1e-10).all()

    def test_projection_improves_separation(self):
        rng = np.random.default_rng(29)
        v, labels = _labeled_gaussians(rng, 5, 30, 10, between=2.0)
        model = fit_lda(v, labels, 4)
        proj = project_lda(model, v)
        assert proj.shape == (150, 4)

        def fisher_ratio(x):
            mu = x.mean(axis=0)
            num = sum(
                (x[labels == s].shape[0]) * np.sum((x[labels == s].mean(axis=0) - mu) ** 2)
                for s in np.unique(labels)
            )
            den = sum(
                np.sum((x[labels == s] - x[labels == s].mean(axis=0)) ** 2)
                for s in np.unique(labels)
            )
            return num / den

        assert fisher_ratio(proj) > fisher_ratio(v)

    def test_too_few_classes(self):
        rng = np.random.default_rng(30)
        v = rng.standard_normal((20, 4))
        with pytest.raises(TooFewClasses):
            fit_lda(v, ["same"] * 20, 2)

    def test_q_capped_by_classes(self):
        rng = np.random.default_rng(31)
        v, labels = _labeled_gaussians(rng, 3, 20, 6)
        with pytest.raises(RankDeficient):
            fit_lda(v, labels, 3)  # between-class rank is classes - 1


class TestPpcaNap:
    def test_estep_matches_direct_solve(self):
        rng = np.random.default_rng(32)
        loading = rng.standard_normal((12, 4))
        obs = rng.standard_normal((30, 12))
        latent, _ = _ppca_estep(loading, obs)
        direct = np.linalg.solve(
            np.eye(4) + loading.T @ loading, loading.T @ obs.T
        ).T
        np.testing.assert_allclose(latent, direct, atol=1e-12)

    def test_loglik_monotone(self):
        rng = np.random.default_rng(33)
        v, labels = _labeled_gaussians(rng, 12, 8, 10)
        model = fit_ppca_nap(v, labels, 3, iters=25)
        hist = np.asarray(model.loglik_history)
        assert hist.size == 26  # seed value plus one per update
        assert (np.diff(hist) >= -1e-8 * np.abs(hist[:-1])).all()

    def test_recovers_channel_subspace(self):
        rng = np.random.default_rng(34)
        dim, q = 15, 2
        channel = scipy.linalg.qr(rng.standard_normal((dim, q)), mode="economic")[0] * 4.0
        speakers = 20
        means = 5.0 * rng.standard_normal((speakers, dim))
        vectors, labels = [], []
        for s in range(speakers):
            y = rng.standard_normal((10, q))
            vectors.append(means[s] + y @ channel.T + 0.3 * rng.standard_normal((10, dim)))
            labels += ["s%d" % s] * 10
        model = fit_ppca_nap(np.vstack(vectors), labels, q, iters=30)
        angles = scipy.linalg.subspace_angles(model.loading, channel)
        assert np.degrees(angles).max() < 5.0

    def test_projection_removes_nuisance(self):
        rng = np.random.default_rng(35)
        dim, q = 10, 2
        channel = scipy.linalg.qr(rng.standard_normal((dim, q)), mode="economic")[0] * 5.0
        v, labels = [], []
        for s in range(15):
            base = 4.0 * rng.standard_normal(dim)
            y = rng.standard_normal((8, q))
            v.append(base + y @ channel.T + 0.2 * rng.standard_normal((8, dim)))
            labels += ["s%d" % s] * 8
        v = np.vstack(v)
        model = fit_ppca_nap(v, labels, q, iters=30)
        cleaned = nap_project(model, v)
        # variance along the true nuisance directions should collapse
        before = np.var(v @ channel, axis=0).sum()
        after = np.var(cleaned @ channel, axis=0).sum()
        assert after < 0.05 * before

    def test_singleton_speakers_ignored(self):
        rng = np.random.default_rng(36)
        v, labels = _labeled_gaussians(rng, 8, 5, 6)
        extra = rng.standard_normal((1, 6))
        with_single = np.vstack([v, extra])
        labels_single = np.concatenate([labels, ["loner"]])
        a = fit_ppca_nap(v, labels, 2, iters=10)
        b = fit_ppca_nap(with_single, labels_single, 2, iters=10)
        np.testing.assert_allclose(a.loading, b.loading, atol=1e-12)

    def test_no_within_variation(self):
        rng = np.random.default_rng(37)
        v = rng.standard_normal((5, 4))
        with pytest.raises(NoWithinSpeakerVariation):
            fit_ppca_nap(v, ["a", "b", "c", "d", "e"], 2)

    def test_q_bounds(self):
        rng = np.random.default_rng(38)
        v, labels = _labeled_gaussians(rng, 5, 4, 6)
        with pytest.raises(DimensionError):
            fit_ppca_nap(v, labels, 6)
