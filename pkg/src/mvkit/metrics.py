"""Detection error tradeoff metrics for verification score sets.

The decision rule is accept iff score >= threshold.  The curve carries one
point per distinct score plus the two infinite endpoints, so every error
trade the scores can realize appears exactly once.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyClass

TARGET = "target"
NONTARGET = "nontarget"
UNKNOWN = "unknown"
TRIAL_LABELS = (TARGET, NONTARGET, UNKNOWN)


@dataclass(frozen=True)
class Trial:
    """One verification trial: claimed identity, test utterance, truth."""

    enroll_id: str
    test_id: str
    label: str = UNKNOWN

    def __post_init__(self):
        if self.label not in TRIAL_LABELS:
            raise ValueError("bad trial label %r" % (self.label,))

    @property
    def key(self):
        return (self.enroll_id, self.test_id)


@dataclass
class ScoreSet:
    """Scores aligned with their trials, optionally per-subsystem."""

    trials: list
    scores: np.ndarray
    subsystem_scores: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.trials),):
            raise DimensionMismatch(
                "%d scores for %d trials" % (self.scores.size, len(self.trials))
            )

    def target_scores(self):
        return self.scores[[t.label == TARGET for t in self.trials]]

    def nontarget_scores(self):
        return self.scores[[t.label == NONTARGET for t in self.trials]]


@dataclass(frozen=True)
class DcfParams:
    """Detection cost weights and target prior."""

    c_miss: float
    c_fa: float
    p_target: float


DCF_PRESETS = {
    "sre08": DcfParams(c_miss=10.0, c_fa=1.0, p_target=0.01),
    "sre10": DcfParams(c_miss=1.0, c_fa=1.0, p_target=0.001),
}


def _split_scores(scores):
    tar = np.sort(scores.target_scores())
    non = np.sort(scores.nontarget_scores())
    if tar.size == 0 or non.size == 0:
        raise EmptyClass(
            "need both classes, have %d targets and %d nontargets" % (tar.size, non.size)
        )
    return tar, non


def _det_curve(scores):
    """Thresholds (ascending, with infinite endpoints) and their rates."""
    tar, non = _split_scores(scores)
    distinct = np.unique(np.concatenate([tar, non]))
    thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])
    # miss: target rejected (score < t); false alarm: nontarget accepted.
    p_miss = np.searchsorted(tar, thresholds, side="left") / tar.size
    p_fa = 1.0 - np.searchsorted(non, thresholds, side="left") / non.size
    return thresholds, p_fa, p_miss


def det_points(scores):
    """Ordered (P_fa, P_miss) pairs, P_fa nonincreasing."""
    _, p_fa, p_miss = _det_curve(scores)
    return list(zip(p_fa.tolist(), p_miss.tolist()))


def compute_eer(scores):
    """Equal error rate and its threshold.

    The miss and false-alarm rates are step functions of the threshold;
    the crossing is resolved by linear interpolation between the two
    adjacent curve points that bracket it.
    """
    thresholds, p_fa, p_miss = _det_curve(scores)
    diff = p_miss - p_fa  # nondecreasing in the threshold
    k = int(np.searchsorted(diff >= 0.0, True))
    if diff[k] == 0.0:
        return float(p_fa[k]), float(thresholds[k])
    lo, hi = k - 1, k
    denom = (p_miss[hi] - p_miss[lo]) - (p_fa[hi] - p_fa[lo])
    frac = (p_fa[lo] - p_miss[lo]) / denom
    eer = p_fa[lo] + frac * (p_fa[hi] - p_fa[lo])
    t_lo, t_hi = thresholds[lo], thresholds[hi]
    if np.isfinite(t_lo) and np.isfinite(t_hi):
        threshold = t_lo + frac * (t_hi - t_lo)
    else:
        threshold = t_hi if np.isfinite(t_hi) else t_lo
    return float(eer), float(threshold)


def compute_mindcf(scores, params):
    """Minimum normalized detection cost over all thresholds.

    The raw cost c_miss p_t P_miss + c_fa (1 - p_t) P_fa is divided by the
    cost of the better blind decision, so the result lies in [0, 1].
    """
    if isinstance(params, str):
        params = DCF_PRESETS[params]
    _, p_fa, p_miss = _det_curve(scores)
    cost = (
        params.c_miss * params.p_target * p_miss
        + params.c_fa * (1.0 - params.p_target) * p_fa
    )
    norm = min(params.c_miss * params.p_target, params.c_fa * (1.0 - params.p_target))
    return float(cost.min() / norm)
