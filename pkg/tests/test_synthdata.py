"""Seeded corpus generation: reproducibility and structural guarantees."""

import numpy as np
import pytest

from mvkit.errors import InvalidSpec
from mvkit.formats import read_frames, read_labels, read_manifest, read_vec
from mvkit.metrics import NONTARGET, TARGET
from mvkit.synthdata import (
    GmmCorpusSpec,
    PldaCorpusSpec,
    build_trials,
    gen_gmm_corpus,
    gen_plda_vectors,
    iter_gmm_sessions,
    sample_reference_gmm,
    speaker_transform,
    substream,
    true_plda_model,
)


def _gmm_spec(**overrides):
    base = dict(
        seed=77,
        speakers=4,
        sessions_per_speaker=3,
        frames_per_session=50,
        dim=5,
        components=4,
        speaker_strength=0.2,
        channel_strength=0.1,
    )
    base.update(overrides)
    return GmmCorpusSpec(**base)


class TestSubstream:
    def test_same_path_reproduces(self):
        a = substream(5, "frames", 3, 1).standard_normal(8)
        b = substream(5, "frames", 3, 1).standard_normal(8)
        np.testing.assert_array_equal(a, b)

    def test_paths_are_independent(self):
        a = substream(5, "frames", 3, 1).standard_normal(8)
        b = substream(5, "frames", 3, 2).standard_normal(8)
        c = substream(5, "speaker", 3, 1).standard_normal(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_draw_order_does_not_leak_across_streams(self):
        s1 = substream(9, "x")
        s1.standard_normal(1000)  # consume a lot
        fresh = substream(9, "y").standard_normal(4)
        np.testing.assert_array_equal(fresh, substream(9, "y").standard_normal(4))


class TestGmmCorpus:
    def test_session_stream_deterministic(self):
        spec = _gmm_spec()
        first = list(iter_gmm_sessions(spec))
        second = list(iter_gmm_sessions(spec))
        assert len(first) == 12
        for (spk_a, ses_a, xa), (spk_b, ses_b, xb) in zip(first, second):
            assert (spk_a, ses_a) == (spk_b, ses_b)
            assert ses_a.startswith(spk_a)
            np.testing.assert_array_equal(xa, xb)

    def test_zero_strength_keeps_reference_means(self):
        spec = _gmm_spec(speaker_strength=0.0)
        t = speaker_transform(spec, 2)
        np.testing.assert_array_equal(t, np.eye(spec.dim))

    def test_transform_scale_tracks_strength(self):
        weak = speaker_transform(_gmm_spec(speaker_strength=0.01), 1) - np.eye(5)
        strong = speaker_transform(_gmm_spec(speaker_strength=0.5), 1) - np.eye(5)
        assert np.linalg.norm(strong) > np.linalg.norm(weak)

    def test_written_corpus_complete(self, tmp_path):
        spec = _gmm_spec()
        out = tmp_path / "corpus"
        gen_gmm_corpus(spec, out)
        rows = read_manifest(out / "manifest.tsv")
        assert len(rows) == 12
        sessions = set()
        for session_id, speaker_id, frames_path in rows:
            sessions.add(session_id)
            frames = read_frames(out / frames_path)
            assert frames.shape == (50, 5)
            assert session_id.startswith(speaker_id)
        assert len(sessions) == 12
        truth = read_vec(out / "truth_transforms.vec")
        assert truth.shape == (4, 25)
        ses_ids, spk_ids = read_labels(out / "truth_transforms.labels")
        assert list(spk_ids) == ["spk%04d" % i for i in range(4)]

    def test_written_corpus_reproducible(self, tmp_path):
        spec = _gmm_spec()
        gen_gmm_corpus(spec, tmp_path / "a")
        gen_gmm_corpus(spec, tmp_path / "b")
        for name in ["manifest.tsv", "reference_gmm.model", "truth_transforms.vec"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        fa = sorted((tmp_path / "a" / "frames").iterdir())
        fb = sorted((tmp_path / "b" / "frames").iterdir())
        assert [p.name for p in fa] == [p.name for p in fb]
        for pa, pb in zip(fa, fb):
            assert pa.read_bytes() == pb.read_bytes()

    def test_reference_model_valid(self):
        gmm = sample_reference_gmm(_gmm_spec())
        gmm.validate()
        assert abs(gmm.weights.sum() - 1.0) < 1e-12
        assert (gmm.variances > 0).all()

    def test_spec_validation(self):
        with pytest.raises(InvalidSpec):
            _gmm_spec(speakers=0).validate()
        with pytest.raises(InvalidSpec):
            _gmm_spec(speaker_strength=-1.0).validate()


class TestPldaCorpus:
    def _spec(self, **overrides):
        base = dict(
            seed=31,
            speakers=20,
            sessions_per_speaker=4,
            dim=8,
            q_speaker=2,
            q_channel=2,
        )
        base.update(overrides)
        return PldaCorpusSpec(**base)

    def test_vectors_deterministic(self):
        spec = self._spec()
        va, ses_a, spk_a = gen_plda_vectors(spec)
        vb, ses_b, spk_b = gen_plda_vectors(spec)
        np.testing.assert_array_equal(va, vb)
        assert list(ses_a) == list(ses_b)
        assert list(spk_a) == list(spk_b)
        assert va.shape == (80, 8)

    def test_speaker_effect_shared_within_speaker(self):
        # strong voice, no channel, tiny noise: sessions nearly coincide
        spec = self._spec(channel_scale=0.0, noise_scale=1e-6, speaker_scale=4.0)
        v, _, speakers = gen_plda_vectors(spec)
        speakers = np.asarray(speakers)
        for spk in np.unique(speakers)[:5]:
            rows = v[speakers == spk]
            assert np.abs(rows - rows[0]).max() < 1e-4

    def test_true_model_shapes(self):
        model = true_plda_model(self._spec())
        assert model.speaker_loading.shape == (8, 2)
        assert model.channel_loading.shape == (8, 2)
        assert (model.residual_var > 0).all()
        # the two factor subspaces are orthogonal by construction
        cross = model.speaker_loading.T @ model.channel_loading
        np.testing.assert_allclose(cross, 0.0, atol=1e-10)

    def test_spec_validation(self):
        with pytest.raises(InvalidSpec):
            self._spec(q_speaker=5, q_channel=5).validate()
        with pytest.raises(InvalidSpec):
            self._spec(noise_scale=0.0).validate()


class TestBuildTrials:
    def _ids(self, speakers=6, sessions=4):
        ses, spk = [], []
        for s in range(speakers):
            for k in range(sessions):
                spk.append("spk%d" % s)
                ses.append("spk%d_s%d" % (s, k))
        return ses, spk

    def test_structure(self):
        ses, spk = self._ids()
        trials = build_trials(ses, spk, seed=1)
        by_spk = dict(zip(ses, spk))
        enrolls = {t.enroll_id for t in trials}
        # enrollment is each speaker's first session, never reused as test
        assert enrolls == {"spk%d_s0" % s for s in range(6)}
        for t in trials:
            assert t.test_id not in enrolls
            if t.label == TARGET:
                assert by_spk[t.enroll_id] == by_spk[t.test_id]
            else:
                assert by_spk[t.enroll_id] != by_spk[t.test_id]

    def test_counts_and_determinism(self):
        ses, spk = self._ids(8, 5)
        trials = build_trials(ses, spk, seed=3, targets=10, nontargets=25)
        tar = [t for t in trials if t.label == TARGET]
        non = [t for t in trials if t.label == NONTARGET]
        assert (len(tar), len(non)) == (10, 25)
        again = build_trials(ses, spk, seed=3, targets=10, nontargets=25)
        assert trials == again
        other = build_trials(ses, spk, seed=4, targets=10, nontargets=25)
        assert trials != other

    def test_full_counts_without_caps(self):
        ses, spk = self._ids(4, 3)
        trials = build_trials(ses, spk, seed=0)
        tar = [t for t in trials if t.label == TARGET]
        non = [t for t in trials if t.label == NONTARGET]
        # 4 speakers x 2 later sessions; nontargets pair them across speakers
        assert len(tar) == 8
        assert len(non) == 8 * 3
