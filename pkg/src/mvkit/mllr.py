"""Per-session linear transforms of UBM means and their super-vectors.

Each session is represented by the square matrices that map the UBM
component means onto the session data under maximum likelihood, one matrix
per regression class.  Flattening those matrices row by row yields the
session's super-vector.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    SingularNormalEquations,
    ZeroOccupancy,
)
from .gmm import _check_frames, _log_resp

RIDGE_CONDITION_LIMIT = 1e12
RIDGE_SCALE = 1e-8


@dataclass
class RegressionClassMap:
    """Assignment of mixture components to regression classes.

    class_of_component: (components,) integer class index per component.
    """

    class_of_component: np.ndarray

    def __post_init__(self):
        self.class_of_component = np.asarray(self.class_of_component, dtype=np.int64)

    @property
    def num_classes(self):
        return int(self.class_of_component.max()) + 1

    def validate(self):
        if self.class_of_component.min() < 0:
            raise ValueError("class indices must be nonnegative")
        present = np.bincount(self.class_of_component, minlength=self.num_classes)
        if not np.all(present > 0):
            raise ValueError("every regression class needs at least one component")

    @classmethod
    def single_class(cls, num_components):
        return cls(np.zeros(num_components, dtype=np.int64))


@dataclass
class MllrTransform:
    """One square mean-transform matrix per regression class."""

    matrices: list  # K arrays of shape (dim, dim)

    @property
    def num_classes(self):
        return len(self.matrices)

    @property
    def dim(self):
        return self.matrices[0].shape[0]


@dataclass
class SuperVector:
    """Flattened transform matrices tagged with corpus identifiers."""

    values: np.ndarray
    speaker_id: str
    session_id: str


def _solve_row_system(gram, rhs, class_index, row):
    """Solve one row's normal equations, ridge-stabilizing if ill conditioned."""
    g = gram
    if np.linalg.cond(g) > RIDGE_CONDITION_LIMIT:
        g = g + (RIDGE_SCALE * np.trace(g) / g.shape[0]) * np.eye(g.shape[0])
    try:
        sol = np.linalg.solve(g, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalEquations(
            "class %d row %d: %s" % (class_index, row, exc)
        ) from exc
    if not np.isfinite(sol).all():
        raise SingularNormalEquations(
            "class %d row %d produced non-finite coefficients" % (class_index, row)
        )
    return sol


def estimate_mllr(
    gmm,
    frames,
    class_map=None,
    iterations=1,
    occupancy_threshold=None,
):
    """Estimate per-class mean transforms for one session.

    For class c and feature row i the transform row solves
    ``G_i a_i = k_i`` with ``G_i = sum_s (occ_s / var_si) mu_s mu_s^T`` and
    ``k_i = sum_s (first_si / var_si) mu_s``, both summed over the
    components of c.  Responsibilities come from the unadapted model on the
    first iteration and from the adapted means afterwards.
    """
    frames = _check_frames(frames, gmm.dim)
    if class_map is None:
        class_map = RegressionClassMap.single_class(gmm.num_components)
    class_map.validate()
    if len(class_map.class_of_component) != gmm.num_components:
        raise DimensionMismatch(
            "class map covers %d components, model has %d"
            % (len(class_map.class_of_component), gmm.num_components)
        )
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    dim = gmm.dim
    if occupancy_threshold is None:
        occupancy_threshold = 10.0 * dim

    matrices = [np.eye(dim) for _ in range(class_map.num_classes)]
    for _ in range(iterations):
        adapted_means = np.empty_like(gmm.means)
        for c in range(class_map.num_classes):
            members = class_map.class_of_component == c
            adapted_means[members] = gmm.means[members] @ matrices[c].T
        log_r, _ = _log_resp(frames, adapted_means, gmm.variances, gmm.weights)
        resp = np.exp(log_r)
        occ = resp.sum(axis=0)
        first = resp.T @ frames

        new_matrices = []
        for c in range(class_map.num_classes):
            members = class_map.class_of_component == c
            mass = occ[members].sum()
            if mass < occupancy_threshold:
                raise ZeroOccupancy(c, mass, occupancy_threshold)
            mu = gmm.means[members]
            inv_var = 1.0 / gmm.variances[members]
            # gram[i] = sum_s occ_s/var_si mu_s mu_s^T, one (dim, dim) system per row
            gram = np.einsum("si,sj,sk->ijk", occ[members, None] * inv_var, mu, mu)
            rhs = (first[members] * inv_var).T @ mu
            a = np.empty((dim, dim))
            for i in range(dim):
                a[i] = _solve_row_system(gram[i], rhs[i], c, i)
            new_matrices.append(a)
        matrices = new_matrices
    return MllrTransform(matrices)


def build_supervector(transform, speaker_id, session_id):
    """Stack transform matrices row-major, classes in ascending index."""
    values = np.concatenate([m.ravel(order="C") for m in transform.matrices])
    return SuperVector(values=values, speaker_id=speaker_id, session_id=session_id)


def split_supervector(values, num_classes, dim):
    """Invert build_supervector back into per-class matrices."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (num_classes * dim * dim,):
        raise DimensionMismatch(
            "super-vector length %d does not match %d classes of %dx%d"
            % (values.size, num_classes, dim, dim)
        )
    return [
        values[c * dim * dim : (c + 1) * dim * dim].reshape(dim, dim)
        for c in range(num_classes)
    ]
