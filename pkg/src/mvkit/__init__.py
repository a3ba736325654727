"""Speaker verification back-ends on windowed MLLR super-vectors.

Sessions are represented by the flattened maximum-likelihood linear
transforms that map a background mixture onto the session's frames.
Overlapping windows of that super-vector feed independent back-ends
(discriminant, principal, nuisance-removal, or factor-model scoring)
whose trial scores are fused by averaging.
"""

__version__ = "0.1.0"

from .errors import MvkitError

__all__ = ["MvkitError", "__version__"]
