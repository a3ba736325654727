"""Back-end systems over full or windowed super-vectors.

A system is a list of subsystem back-ends, one per window of the window
plan (a single one covering everything when no window is given).  Each
subsystem is trained independently; trial scores are the equal-weight
average of the subsystem scores.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import efr as efr_mod
from . import plda as plda_mod
from . import projections as proj
from .errors import (
    DimensionMismatch,
    SessionMismatch,
    TrialMismatch,
    UnknownId,
)
from .metrics import ScoreSet
from .mvector import plan_windows

KINDS = ("lda-efr", "pca-efr", "nap-efr", "plda", "cascade")


@dataclass
class BackendSpec:
    """What to fit on each window's vectors.

    kind selects the chain: discriminant, principal, or nuisance-removal
    projection followed by whitening/length normalization and a
    within-speaker metric; a factor model on length-normalized vectors; or
    the cascade that feeds discriminant projections into the factor model.
    """

    kind: str
    q: int | None = None
    q_speaker: int | None = None
    q_channel: int | None = None
    efr_iterations: int = 2
    ppca_iterations: int = 30
    plda_iterations: int = 20
    lda_ridge: float = 1e-6
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError("unknown back-end kind %r (choose from %s)" % (self.kind, ", ".join(KINDS)))
        if self.kind in ("lda-efr", "pca-efr", "nap-efr", "cascade") and not self.q:
            raise ValueError("kind %r needs q" % self.kind)
        if self.kind in ("plda", "cascade") and (
            self.q_speaker is None or self.q_channel is None
        ):
            raise ValueError("kind %r needs q_speaker and q_channel" % self.kind)


@dataclass
class Subsystem:
    """One window's fitted back-end chain."""

    kind: str
    normalizer: proj.MeanVarNorm | None = None
    lda: proj.LdaModel | None = None
    pca: proj.PcaModel | None = None
    nap: proj.PpcaNapModel | None = None
    efr: efr_mod.EfrModel | None = None
    norm_stages: list | None = None
    plda: plda_mod.PldaModel | None = None
    scorer: plda_mod.PldaScorer | None = field(default=None, repr=False)

    def transform(self, vectors):
        """Map raw window vectors into the scoring space."""
        x = np.asarray(vectors, dtype=np.float64)
        single = x.ndim == 1
        x = x[None, :] if single else x
        if self.normalizer is not None:
            x = proj.apply_meanvar(self.normalizer, x)
        if self.lda is not None:
            x = proj.project_lda(self.lda, x)
        if self.pca is not None:
            x = proj.project_pca(self.pca, x)
        if self.nap is not None:
            x = proj.nap_project(self.nap, x)
        if self.efr is not None:
            x = efr_mod.efr_normalize(self.efr, x)
        if self.norm_stages is not None:
            x = efr_mod.apply_norm_stages(self.norm_stages, x)
        return x[0] if single else x

    def score(self, enroll, test):
        if self.efr is not None:
            return efr_mod.mahalanobis_score(self.efr, enroll, test)
        return plda_mod.plda_score(self.scorer, enroll, test)

    def ensure_scorer(self):
        if self.plda is not None and self.scorer is None:
            self.scorer = plda_mod.build_scorer(self.plda)


def fit_subsystem(spec, vectors, speaker_labels):
    """Fit one back-end chain on one window's training vectors."""
    spec.validate()
    sub = Subsystem(kind=spec.kind)
    x = np.asarray(vectors, dtype=np.float64)
    if spec.kind in ("lda-efr", "pca-efr", "nap-efr", "cascade"):
        sub.normalizer = proj.fit_meanvar(x)
        x = proj.apply_meanvar(sub.normalizer, x)
    if spec.kind in ("lda-efr", "cascade"):
        sub.lda = proj.fit_lda(x, speaker_labels, spec.q, ridge=spec.lda_ridge)
        x = proj.project_lda(sub.lda, x)
    elif spec.kind == "pca-efr":
        sub.pca = proj.fit_pca(x, spec.q)
        x = proj.project_pca(sub.pca, x)
    elif spec.kind == "nap-efr":
        sub.nap = proj.fit_ppca_nap(x, speaker_labels, spec.q, iters=spec.ppca_iterations)
        x = proj.nap_project(sub.nap, x)
    if spec.kind in ("lda-efr", "pca-efr", "nap-efr"):
        sub.efr = efr_mod.fit_efr(x, speaker_labels, iterations=spec.efr_iterations)
    else:
        x, sub.norm_stages = plda_mod.plda_preprocess(x, speaker_labels)
        sub.plda = plda_mod.fit_plda(
            x,
            speaker_labels,
            spec.q_speaker,
            spec.q_channel,
            iters=spec.plda_iterations,
            seed=spec.seed,
        )
        sub.ensure_scorer()
    return sub


@dataclass
class SystemModel:
    """Window plan plus one fitted subsystem per window."""

    spec: BackendSpec
    input_dim: int
    window: int | None
    subsystems: list

    @property
    def plan(self):
        if self.window is None:
            return None
        return plan_windows(self.input_dim, self.window)

    def slices(self, vectors):
        """Window views of (count, input_dim) vectors, full when unwindowed."""
        x = np.asarray(vectors, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(
                "vectors have dim %d, system expects %d" % (x.shape[-1], self.input_dim)
            )
        plan = self.plan
        if plan is None:
            return [x]
        return [x[..., o : o + plan.window] for o in plan.offsets]


def _window_slices(vectors, window):
    x = np.asarray(vectors, dtype=np.float64)
    if window is None:
        return [x]
    plan = plan_windows(x.shape[1], window)
    return [x[:, o : o + plan.window] for o in plan.offsets]


def train_system(spec, vectors, speaker_labels, window=None, threads=1):
    """Fit one subsystem per window over the training vectors.

    Subsystems are independent, so they may be fitted by a thread pool;
    results are assembled in window order either way.
    """
    spec.validate()
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("expected (count, dim) training vectors")
    if len(speaker_labels) != x.shape[0]:
        raise DimensionMismatch("labels and vectors disagree in length")
    pieces = _window_slices(x, window)
    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            subsystems = list(pool.map(lambda p: fit_subsystem(spec, p, speaker_labels), pieces))
    else:
        subsystems = [fit_subsystem(spec, p, speaker_labels) for p in pieces]
    return SystemModel(spec=spec, input_dim=x.shape[1], window=window, subsystems=subsystems)


def _resolve(mapping, wanted, role, average_multi=False):
    out = {}
    for key in wanted:
        if key not in mapping:
            raise UnknownId("%s id %r has no stored vector" % (role, key))
        vec = np.asarray(mapping[key], dtype=np.float64)
        if vec.ndim == 2:
            if not average_multi:
                raise DimensionMismatch(
                    "%s id %r maps to %d vectors; enable multi-session averaging"
                    % (role, key, vec.shape[0])
                )
            vec = vec.mean(axis=0)
        out[key] = vec
    return out


def score_trials(system, enroll_vectors, test_vectors, trials, threads=1, average_multi_enroll=False):
    """Score trials against a fitted system.

    Returns the fused score set; per-subsystem scores ride along for
    diagnostics.  Enrollment is one vector per id unless multi-session
    averaging is explicitly enabled.
    """
    enroll_ids = sorted({t.enroll_id for t in trials})
    test_ids = sorted({t.test_id for t in trials})
    enroll = _resolve(enroll_vectors, enroll_ids, "enroll", average_multi_enroll)
    test = _resolve(test_vectors, test_ids, "test", False)

    enroll_mat = np.stack([enroll[i] for i in enroll_ids]) if enroll_ids else np.zeros((0, system.input_dim))
    test_mat = np.stack([test[i] for i in test_ids]) if test_ids else np.zeros((0, system.input_dim))
    enroll_slices = system.slices(enroll_mat)
    test_slices = system.slices(test_mat)
    e_index = {key: i for i, key in enumerate(enroll_ids)}
    t_index = {key: i for i, key in enumerate(test_ids)}

    def _score_one(args):
        sub, e_piece, t_piece = args
        sub.ensure_scorer()
        e_t = sub.transform(e_piece)
        t_t = sub.transform(t_piece)
        return np.array(
            [sub.score(e_t[e_index[t.enroll_id]], t_t[t_index[t.test_id]]) for t in trials]
        )

    jobs = list(zip(system.subsystems, enroll_slices, test_slices))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_score_one, jobs))
    else:
        rows = [_score_one(j) for j in jobs]
    per_subsystem = np.stack(rows)
    fused = per_subsystem.mean(axis=0)
    return ScoreSet(trials=list(trials), scores=fused, subsystem_scores=per_subsystem)


def late_fuse(score_sets, weights=None, standardize=False):
    """Weighted sum of score sets over identical trials.

    With standardization on, each set is shifted/scaled to zero mean and
    unit variance before weighting (off by default).
    """
    if not score_sets:
        raise TrialMismatch("nothing to fuse")
    if weights is None:
        weights = [1.0 / len(score_sets)] * len(score_sets)
    if len(weights) != len(score_sets):
        raise TrialMismatch("%d weights for %d score sets" % (len(weights), len(score_sets)))
    base = score_sets[0]
    base_order = {t.key: i for i, t in enumerate(base.trials)}
    fused = np.zeros(len(base.trials))
    for sset, w in zip(score_sets, weights):
        order = {t.key: i for i, t in enumerate(sset.trials)}
        if set(order) != set(base_order):
            raise TrialMismatch("score sets cover different trials")
        for t in sset.trials:
            if t.label != base.trials[base_order[t.key]].label:
                raise TrialMismatch("trial %r has conflicting ground truth" % (t.key,))
        values = sset.scores
        if standardize:
            std = values.std()
            values = (values - values.mean()) / (std if std > 0 else 1.0)
        for t, v in zip(sset.trials, values):
            fused[base_order[t.key]] += w * v
    return ScoreSet(trials=list(base.trials), scores=fused)


def early_fuse(vector_sets):
    """Concatenate aligned vector sets session by session."""
    if not vector_sets:
        raise SessionMismatch("nothing to concatenate")
    keys = set(vector_sets[0])
    for vs in vector_sets[1:]:
        if set(vs) != keys:
            raise SessionMismatch("vector sets cover different sessions")
    return {
        key: np.concatenate([np.asarray(vs[key], dtype=np.float64) for vs in vector_sets])
        for key in vector_sets[0]
    }
