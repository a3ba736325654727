"""Windowed sub-vectors of a session super-vector.

A window of even length W slides over the super-vector with a hop of W/2.
When the last full-step window stops short of the end, one extra window is
anchored at the end so every element is covered; duplicate offsets are
dropped.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OddWindow, TooFewSubvectors, WindowTooLarge


@dataclass(frozen=True)
class WindowPlan:
    """Window length plus the start offsets it induces on a vector."""

    vector_length: int
    window: int
    offsets: tuple

    @property
    def count(self):
        return len(self.offsets)


@dataclass
class MVectorSet:
    """Sub-vectors cut from one super-vector, one per plan offset."""

    plan: WindowPlan
    subvectors: list  # count arrays of shape (window,)
    speaker_id: str = ""
    session_id: str = ""


def plan_windows(vector_length, window):
    """Enumerate window offsets for the given lengths.

    Offsets advance by window/2 while a full window fits; if the final
    full-step window does not reach the end, an end-anchored offset is
    appended (deduplicated).
    """
    n = int(vector_length)
    w = int(window)
    if w <= 0 or n <= 0:
        raise WindowTooLarge("window and vector length must be positive")
    if w > n:
        raise WindowTooLarge("window %d exceeds vector length %d" % (w, n))
    if w % 2 != 0:
        raise OddWindow("window length %d is odd; the half-window hop must be integral" % w)
    hop = w // 2
    offsets = list(range(0, n - w + 1, hop))
    if offsets[-1] + w < n:
        offsets.append(n - w)
    return WindowPlan(vector_length=n, window=w, offsets=tuple(offsets))


def segment(supervector, window):
    """Cut a super-vector into its planned sub-vectors."""
    values = np.asarray(supervector.values, dtype=np.float64)
    plan = plan_windows(values.shape[0], window)
    subs = [values[o : o + plan.window].copy() for o in plan.offsets]
    return MVectorSet(
        plan=plan,
        subvectors=subs,
        speaker_id=supervector.speaker_id,
        session_id=supervector.session_id,
    )


def cross_mvectors(mset):
    """Concatenate all unordered sub-vector pairs i < j, lexicographic order."""
    subs = mset.subvectors
    if len(subs) < 2:
        raise TooFewSubvectors("pairing needs at least two sub-vectors, have %d" % len(subs))
    return [
        np.concatenate([subs[i], subs[j]])
        for i in range(len(subs))
        for j in range(i + 1, len(subs))
    ]
