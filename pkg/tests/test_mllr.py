"""Mean-transform estimation and super-vector assembly."""

import numpy as np
import pytest

from mvkit.errors import DimensionMismatch, ZeroOccupancy
from mvkit.gmm import DiagonalGmm, UbmConfig, train_ubm
from mvkit.mllr import (
    MllrTransform,
    RegressionClassMap,
    SuperVector,
    build_supervector,
    estimate_mllr,
    split_supervector,
)


def _unit_gmm(means):
    means = np.asarray(means, dtype=np.float64)
    m = means.shape[0]
    return DiagonalGmm(
        weights=np.full(m, 1.0 / m),
        means=means,
        variances=np.ones_like(means),
    )


class TestEstimateMllr:
    def test_scalar_hand_case(self):
        # one component, one dimension: a = mean(x) / mu
        gmm = _unit_gmm([[2.0]])
        frames = np.array([[1.0], [2.0], [3.0], [6.0]] * 5)  # mean 3, 20 frames
        t = estimate_mllr(gmm, frames)
        np.testing.assert_allclose(t.matrices[0], [[1.5]], atol=1e-12)

    def test_identity_recovery(self):
        # frames drawn from the model itself: the transform is near identity
        rng = np.random.default_rng(10)
        means = rng.normal(0, 3, size=(8, 4))
        gmm = _unit_gmm(means)
        comp = rng.integers(0, 8, size=20000)
        frames = means[comp] + rng.standard_normal((20000, 4))
        t = estimate_mllr(gmm, frames)
        np.testing.assert_allclose(t.matrices[0], np.eye(4), atol=0.05)

    def test_known_linear_map_recovery(self):
        rng = np.random.default_rng(11)
        means = rng.normal(0, 3, size=(16, 5))
        gmm = _unit_gmm(means)
        true_a = np.eye(5) + 0.1 * rng.standard_normal((5, 5))
        comp = rng.integers(0, 16, size=50000)
        frames = means[comp] @ true_a.T + rng.standard_normal((50000, 5))
        t = estimate_mllr(gmm, frames)
        err = np.linalg.norm(t.matrices[0] - true_a) / np.linalg.norm(true_a)
        assert err < 0.05

    def test_second_iteration_changes_estimate(self):
        rng = np.random.default_rng(12)
        means = rng.normal(0, 3, size=(8, 3))
        gmm = _unit_gmm(means)
        true_a = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
        comp = rng.integers(0, 8, size=30000)
        frames = means[comp] @ true_a.T + rng.standard_normal((30000, 3))
        t1 = estimate_mllr(gmm, frames, iterations=1)
        t2 = estimate_mllr(gmm, frames, iterations=2)
        assert np.isfinite(t2.matrices).all()
        assert not np.array_equal(t1.matrices, t2.matrices)

    def test_multiple_classes(self):
        rng = np.random.default_rng(13)
        means = rng.normal(0, 3, size=(6, 3))
        gmm = _unit_gmm(means)
        class_map = RegressionClassMap(class_of_component=(0, 0, 0, 1, 1, 1))
        comp = rng.integers(0, 6, size=30000)
        frames = means[comp] + rng.standard_normal((30000, 3))
        t = estimate_mllr(gmm, frames, class_map=class_map)
        assert t.num_classes == 2
        assert all(m.shape == (3, 3) for m in t.matrices)
        np.testing.assert_allclose(t.matrices[0], np.eye(3), atol=0.1)
        np.testing.assert_allclose(t.matrices[1], np.eye(3), atol=0.1)

    def test_zero_occupancy(self):
        # second class's components sit far from every frame
        means = np.array([[0.0, 0.0], [1.0, 1.0], [500.0, 500.0]])
        gmm = _unit_gmm(means)
        class_map = RegressionClassMap(class_of_component=(0, 0, 1))
        rng = np.random.default_rng(14)
        frames = rng.standard_normal((200, 2))
        with pytest.raises(ZeroOccupancy) as info:
            estimate_mllr(gmm, frames, class_map=class_map)
        assert info.value.class_index == 1

    def test_occupancy_threshold_scales_with_dim(self):
        # 10 frames per class and dimension are required by default
        gmm = _unit_gmm(np.array([[1.0, 2.0]]))
        frames = np.array([[1.0, 2.0]] * 19)
        with pytest.raises(ZeroOccupancy):
            estimate_mllr(gmm, frames)
        t = estimate_mllr(gmm, np.array([[1.0, 2.0]] * 20))
        assert np.isfinite(t.matrices).all()

    def test_ridge_on_rank_deficient_gram(self):
        # both components share one mean direction: G is rank one
        gmm = _unit_gmm(np.array([[1.0, 2.0], [2.0, 4.0]]))
        rng = np.random.default_rng(15)
        frames = np.array([1.0, 2.0]) + 0.1 * rng.standard_normal((400, 2))
        t = estimate_mllr(gmm, frames)
        assert np.isfinite(t.matrices).all()

    def test_dim_mismatch(self):
        gmm = _unit_gmm(np.array([[1.0, 2.0]]))
        with pytest.raises(DimensionMismatch):
            estimate_mllr(gmm, np.zeros((30, 3)))

    def test_class_map_validation(self):
        with pytest.raises(ValueError):
            RegressionClassMap(class_of_component=(0, 2)).validate()  # class 1 empty


class TestSuperVector:
    def test_layout_frozen(self):
        t = MllrTransform(
            matrices=np.array(
                [[[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]]
            )
        )
        sv = build_supervector(t, "spk", "ses")
        np.testing.assert_array_equal(sv.values, np.arange(1.0, 9.0))
        assert sv.values.shape == (2 * 2 * 2,)
        assert (sv.speaker_id, sv.session_id) == ("spk", "ses")

    def test_round_trip(self):
        rng = np.random.default_rng(16)
        mats = rng.standard_normal((3, 4, 4))
        sv = build_supervector(MllrTransform(matrices=mats), "a", "b")
        back = split_supervector(sv.values, 3, 4)
        np.testing.assert_array_equal(back, mats)

    def test_split_rejects_wrong_length(self):
        with pytest.raises(DimensionMismatch):
            split_supervector(np.zeros(7), 1, 3)

    def test_expected_dims(self):
        # the sizes the windowing defaults are built around
        assert 2 * 42 * 42 == 3528
        sv = build_supervector(
            MllrTransform(matrices=np.zeros((1, 42, 42))), "s", "t"
        )
        assert sv.values.shape == (1764,)


class TestEndToEndWithUbm:
    def test_trained_ubm_identity_session(self):
        # a session drawn from the background model itself stays near I
        rng = np.random.default_rng(17)
        pool = np.vstack(
            [c + rng.standard_normal((600, 3)) for c in [[0, 0, 0], [5, 0, 2], [0, 5, -2], [-5, -5, 0]]]
        )
        ubm = train_ubm(pool, 4, UbmConfig(seed=4))
        comp = rng.choice(4, size=10000, p=ubm.weights)
        session = ubm.means[comp] + np.sqrt(ubm.variances[comp]) * rng.standard_normal((10000, 3))
        t = estimate_mllr(ubm, session)
        np.testing.assert_allclose(t.matrices[0], np.eye(3), atol=0.08)
