"""Seeded synthetic corpora with known ground truth.

Randomness comes from Philox4x64-10 counter-based streams keyed by
(seed, fold(path)), where fold is the 64-bit FNV-1a hash of the stream's
purpose string and integer indices.  Substreams are therefore independent
of generation order, and a corpus is a pure function of its spec.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import InvalidSpec
from .gmm import DiagonalGmm
from .metrics import NONTARGET, TARGET, Trial
from .plda import PldaModel
from .store import save_gmm, save_plda

_FNV_OFFSET = np.uint64(14695981039346656037)
_FNV_PRIME = np.uint64(1099511628211)


def _fold(parts):
    acc = _FNV_OFFSET
    with np.errstate(over="ignore"):
        for part in parts:
            data = part.encode("ascii") if isinstance(part, str) else int(part).to_bytes(8, "little", signed=False)
            for byte in data:
                acc = (acc ^ np.uint64(byte)) * _FNV_PRIME
    return acc


def substream(seed, *path):
    """Independent generator for one (seed, purpose, indices...) path."""
    key = np.array([np.uint64(seed), _fold(path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GmmCorpusSpec:
    """Frame-level corpus: a reference mixture plus per-speaker mean
    transforms and per-session channel offsets."""

    seed: int
    speakers: int
    sessions_per_speaker: int
    frames_per_session: int
    dim: int
    components: int
    speaker_strength: float = 0.1  # scale of the per-speaker transform offset
    channel_strength: float = 0.0  # scale of the per-session mean jitter

    def validate(self):
        if min(self.speakers, self.sessions_per_speaker, self.frames_per_session) < 1:
            raise InvalidSpec("speaker/session/frame counts must be positive")
        if self.dim < 1 or self.components < 1:
            raise InvalidSpec("dim and components must be positive")
        if self.speaker_strength < 0 or self.channel_strength < 0:
            raise InvalidSpec("strengths must be nonnegative")
        if self.seed < 0:
            raise InvalidSpec("seed must be nonnegative")


def speaker_id(index):
    return "spk%04d" % index


def session_id(spk_index, ses_index):
    return "%s_s%02d" % (speaker_id(spk_index), ses_index)


def sample_reference_gmm(spec):
    """Reference mixture: spread means, moderate diagonal variances."""
    rng = substream(spec.seed, "ubm")
    means = rng.standard_normal((spec.components, spec.dim)) * 3.0
    variances = rng.uniform(0.5, 1.5, size=(spec.components, spec.dim))
    raw = rng.uniform(0.5, 1.5, size=spec.components)
    weights = raw / raw.sum()
    return DiagonalGmm(weights=weights, means=means, variances=variances)


def speaker_transform(spec, spk_index):
    """Ground-truth mean transform: identity plus a scaled random matrix
    with entries standard normal over dim."""
    rng = substream(spec.seed, "speaker", spk_index)
    jitter = rng.standard_normal((spec.dim, spec.dim)) / spec.dim
    return np.eye(spec.dim) + spec.speaker_strength * jitter


def session_frames(spec, ubm, transform, spk_index, ses_index):
    """Sample one session: mixture draws around transformed means plus a
    per-session channel offset."""
    rng = substream(spec.seed, "session", spk_index, ses_index)
    offset = spec.channel_strength * rng.standard_normal(spec.dim)
    means = ubm.means @ transform.T + offset
    comp = rng.choice(spec.components, size=spec.frames_per_session, p=ubm.weights)
    noise = rng.standard_normal((spec.frames_per_session, spec.dim))
    return means[comp] + noise * np.sqrt(ubm.variances[comp])


def iter_gmm_sessions(spec, ubm=None, transforms=None):
    """Yield (speaker_id, session_id, frames) in deterministic order."""
    spec.validate()
    ubm = ubm or sample_reference_gmm(spec)
    for r in range(spec.speakers):
        transform = transforms[r] if transforms else speaker_transform(spec, r)
        for s in range(spec.sessions_per_speaker):
            yield speaker_id(r), session_id(r, s), session_frames(spec, ubm, transform, r, s)


def gen_gmm_corpus(spec, out_dir):
    """Write a frame corpus: per-session FRAMES files, a manifest, the
    reference mixture, and the ground-truth transforms."""
    spec.validate()
    os.makedirs(out_dir, exist_ok=True)
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    ubm = sample_reference_gmm(spec)
    save_gmm(os.path.join(out_dir, "reference_gmm.model"), ubm)

    transforms = [speaker_transform(spec, r) for r in range(spec.speakers)]
    flat = np.stack([t.ravel() for t in transforms])
    formats.write_vec(os.path.join(out_dir, "truth_transforms.vec"), flat)
    formats.write_labels(
        os.path.join(out_dir, "truth_transforms.labels"),
        [speaker_id(r) for r in range(spec.speakers)],
        [speaker_id(r) for r in range(spec.speakers)],
    )

    manifest_rows = []
    for spk, ses, frames in iter_gmm_sessions(spec, ubm=ubm, transforms=transforms):
        rel = os.path.join("frames", "%s.frames" % ses)
        formats.write_frames(os.path.join(out_dir, rel), frames)
        manifest_rows.append((ses, spk, rel))
    formats.write_manifest(os.path.join(out_dir, "manifest.tsv"), manifest_rows)
    return ubm, transforms, manifest_rows


@dataclass(frozen=True)
class PldaCorpusSpec:
    """Vector-level corpus drawn from a known factor model."""

    seed: int
    speakers: int
    sessions_per_speaker: int
    dim: int
    q_speaker: int
    q_channel: int
    speaker_scale: float = 1.0
    channel_scale: float = 0.5
    noise_scale: float = 0.3

    def validate(self):
        if min(self.speakers, self.sessions_per_speaker) < 1:
            raise InvalidSpec("speaker/session counts must be positive")
        if self.dim < 1:
            raise InvalidSpec("dim must be positive")
        if not (0 <= self.q_speaker <= self.dim) or not (0 <= self.q_channel <= self.dim):
            raise InvalidSpec("factor dims out of range")
        if self.q_speaker + self.q_channel > self.dim:
            raise InvalidSpec("factor dims exceed vector dim")
        if min(self.speaker_scale, self.channel_scale) < 0 or self.noise_scale <= 0:
            raise InvalidSpec("scales must be nonnegative, noise positive")
        if self.seed < 0:
            raise InvalidSpec("seed must be nonnegative")


def true_plda_model(spec):
    """The generating factor model implied by the spec."""
    rng = substream(spec.seed, "plda-model")
    mean = rng.standard_normal(spec.dim)
    basis = np.linalg.qr(rng.standard_normal((spec.dim, spec.dim)))[0]
    voice = basis[:, : spec.q_speaker] * spec.speaker_scale
    channel = basis[:, spec.q_speaker : spec.q_speaker + spec.q_channel] * spec.channel_scale
    residual = np.full(spec.dim, spec.noise_scale**2)
    return PldaModel(
        mean=mean,
        speaker_loading=voice,
        channel_loading=channel,
        residual_var=residual,
    )


def gen_plda_vectors(spec, model=None):
    """Sample session vectors; returns (vectors, session_ids, speaker_ids)."""
    spec.validate()
    model = model or true_plda_model(spec)
    vectors = []
    sessions = []
    speakers = []
    for r in range(spec.speakers):
        y = substream(spec.seed, "plda-speaker", r).standard_normal(spec.q_speaker)
        base = model.mean + model.speaker_loading @ y
        for s in range(spec.sessions_per_speaker):
            rng = substream(spec.seed, "plda-session", r, s)
            z = rng.standard_normal(spec.q_channel)
            eps = rng.standard_normal(spec.dim) * np.sqrt(model.residual_var)
            vectors.append(base + model.channel_loading @ z + eps)
            sessions.append(session_id(r, s))
            speakers.append(speaker_id(r))
    return np.stack(vectors), sessions, speakers


def gen_plda_corpus(spec, out_dir):
    """Write a vector corpus: VEC matrix, labels, and the true model."""
    model = true_plda_model(spec)
    vectors, sessions, speakers = gen_plda_vectors(spec, model)
    os.makedirs(out_dir, exist_ok=True)
    formats.write_vec(os.path.join(out_dir, "vectors.vec"), vectors)
    formats.write_labels(os.path.join(out_dir, "vectors.labels"), sessions, speakers)
    save_plda(os.path.join(out_dir, "truth_plda.model"), model)
    return model, vectors, sessions, speakers


def build_trials(session_ids, speaker_ids, seed, targets=None, nontargets=None):
    """Pair each speaker's first session (enrollment) against later
    sessions; sample down to the requested counts with a seeded stream."""
    first = {}
    enroll = {}
    for ses, spk in zip(session_ids, speaker_ids):
        if spk not in first:
            first[spk] = ses
            enroll[ses] = spk
    tar, non = [], []
    for ses, spk in zip(session_ids, speaker_ids):
        if ses in enroll:
            continue
        for enroll_spk, enroll_ses in first.items():
            if enroll_spk == spk:
                tar.append(Trial(enroll_ses, ses, TARGET))
            else:
                non.append(Trial(enroll_ses, ses, NONTARGET))
    rng = substream(seed, "trials")
    if targets is not None and len(tar) > targets:
        keep = rng.choice(len(tar), size=targets, replace=False)
        tar = [tar[i] for i in np.sort(keep)]
    if nontargets is not None and len(non) > nontargets:
        keep = rng.choice(len(non), size=nontargets, replace=False)
        non = [non[i] for i in np.sort(keep)]
    return tar + non
