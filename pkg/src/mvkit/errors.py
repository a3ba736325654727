"""Exception types raised by the toolkit.

Every error the library raises deliberately derives from MvkitError so the
command line front end can map failures onto a single diagnostic line.
"""


class MvkitError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(MvkitError):
    """Input dimensionality does not match the model."""


class DimensionError(MvkitError):
    """Requested factor or projection dimensions are out of range."""


class TooFewFrames(MvkitError):
    """Not enough (distinct) frames to fit the requested mixture."""


class DegenerateDimension(MvkitError):
    """A feature dimension carries no variance."""


class ZeroOccupancy(MvkitError):
    """A regression class received (almost) no posterior mass."""

    def __init__(self, class_index, occupancy, threshold):
        self.class_index = class_index
        self.occupancy = occupancy
        self.threshold = threshold
        super().__init__(
            "regression class %d has occupancy %.3g below threshold %.3g"
            % (class_index, occupancy, threshold)
        )


class SingularNormalEquations(MvkitError):
    """A row system of the transform normal equations cannot be solved."""


class WindowTooLarge(MvkitError):
    """Window length exceeds the vector length."""


class OddWindow(MvkitError):
    """Window length must be even so the half-window hop is an integer."""


class TooFewSubvectors(MvkitError):
    """Pairing requires at least two sub-vectors."""


class RankDeficient(MvkitError):
    """Requested more directions than the data supports."""


class TooFewClasses(MvkitError):
    """Discriminant directions need at least two classes."""


class NoWithinSpeakerVariation(MvkitError):
    """No speaker has two or more sessions, so the within-speaker
    subspace is unobservable."""


class SingularCovariance(MvkitError):
    """A covariance required by normalization is singular beyond repair."""


class ZeroVector(MvkitError):
    """A vector coincides with the normalization mean and cannot be
    length-normalized."""


class TooFewSpeakers(MvkitError):
    """Factor analysis training needs at least two speakers."""


class UnknownId(MvkitError):
    """A trial references an enrollment or test id with no stored vector."""


class TrialMismatch(MvkitError):
    """Score sets to be fused cover different trials."""


class SessionMismatch(MvkitError):
    """Vector sets to be concatenated cover different sessions."""


class EmptyClass(MvkitError):
    """Metric computation needs at least one target and one nontarget."""


class InvalidSpec(MvkitError):
    """A corpus or run specification is inconsistent."""
