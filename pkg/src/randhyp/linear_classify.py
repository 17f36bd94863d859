"""Which null families a group of invertible linear maps can leave invariant.

For i.i.d. coordinates and a single invertible ``A``:

* a permutation matrix leaves every distribution invariant;
* monomial with nonzeros in {-1, +1}, some -1, needs symmetry about zero;
* any other monomial matrix admits no distribution;
* a column with two or more nonzeros forces Gaussianity.  Among Gaussians,
  ``AᵀA = I`` keeps ``N(0, s²)``, and ``A 1 = 1`` additionally keeps the
  mean free.  A non-orthogonal matrix in this branch is labelled ``EMPTY``;
  that refinement follows from matching covariances and means, not from
  the monomial argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import reduce

import numpy as np
from scipy.stats import ks_2samp

from .core import MATRIX_COND_LIMIT, DimensionMismatch, MatrixTransform, NonFiniteValue, SingularMatrix
from .dgps import get_dgp

DEFAULT_ZERO_TOL = 1e-9


class GroupClassification(Enum):
    ALL_DISTRIBUTIONS = "AllDistributions"
    SYMMETRIC_ABOUT_ZERO = "SymmetricAboutZero"
    GAUSSIAN_ANY_MEAN_VAR = "GaussianAnyMeanVar"
    GAUSSIAN_ZERO_MEAN = "GaussianZeroMean"
    EMPTY = "Empty"

    def meet(self, other: "GroupClassification") -> "GroupClassification":
        """Largest family contained in both."""
        props = _PROPS[self] | _PROPS[other]
        return _FROM_PROPS.get(frozenset(props), GroupClassification.EMPTY)


# each label as the set of constraints it imposes on the distribution
_PROPS = {
    GroupClassification.ALL_DISTRIBUTIONS: frozenset(),
    GroupClassification.SYMMETRIC_ABOUT_ZERO: frozenset({"symmetric"}),
    GroupClassification.GAUSSIAN_ANY_MEAN_VAR: frozenset({"gaussian"}),
    GroupClassification.GAUSSIAN_ZERO_MEAN: frozenset({"symmetric", "gaussian"}),
    GroupClassification.EMPTY: frozenset({"empty"}),
}
_FROM_PROPS = {v: k for k, v in _PROPS.items()}


def _as_matrix(A) -> np.ndarray:
    if isinstance(A, MatrixTransform):
        return np.asarray(A.matrix)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.size == 0:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteValue("matrix entries must be finite")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MATRIX_COND_LIMIT:
        raise SingularMatrix(f"condition number {cond:.3g} exceeds {MATRIX_COND_LIMIT:g}")
    return A


def classify_generator(A, zero_tol: float = DEFAULT_ZERO_TOL) -> GroupClassification:
    """Label one invertible matrix.

    ``zero_tol`` is relative to the largest absolute entry: smaller entries
    count as zero, and the orthogonality and fixed-ones checks use the same
    threshold.
    """
    A = _as_matrix(A)
    n = A.shape[0]
    scale = float(np.max(np.abs(A)))
    tol = zero_tol * scale
    nonzero = np.abs(A) > tol
    if np.any(nonzero.sum(axis=0) >= 2):
        orthogonal = np.max(np.abs(A.T @ A - np.eye(n))) <= zero_tol
        if not orthogonal:
            return GroupClassification.EMPTY
        fixes_ones = np.max(np.abs(A @ np.ones(n) - 1.0)) <= zero_tol
        return GroupClassification.GAUSSIAN_ANY_MEAN_VAR if fixes_ones else GroupClassification.GAUSSIAN_ZERO_MEAN
    # invertible with at most one nonzero per column: monomial
    d = A[nonzero]
    if np.all(np.abs(d - 1.0) <= zero_tol):
        return GroupClassification.ALL_DISTRIBUTIONS
    if np.all(np.abs(np.abs(d) - 1.0) <= zero_tol):
        return GroupClassification.SYMMETRIC_ABOUT_ZERO
    return GroupClassification.EMPTY


@dataclass
class ClassificationReport:
    labels: list
    meet: GroupClassification
    zero_tol: float
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "labels": [lab.value for lab in self.labels],
            "meet": self.meet.value,
            "zero_tol": self.zero_tol,
            "notes": self.notes,
        }


def classify_group(generators, zero_tol: float = DEFAULT_ZERO_TOL) -> GroupClassification:
    """Meet of the per-generator labels; an empty list gives ``ALL_DISTRIBUTIONS``."""
    return classification_report(generators, zero_tol).meet


def classification_report(generators, zero_tol: float = DEFAULT_ZERO_TOL) -> ClassificationReport:
    labels = [classify_generator(A, zero_tol) for A in generators]
    meet = reduce(GroupClassification.meet, labels, GroupClassification.ALL_DISTRIBUTIONS)
    notes = []
    for i, (A, lab) in enumerate(zip(generators, labels)):
        M = _as_matrix(A)
        if lab is GroupClassification.EMPTY and np.any((np.abs(M) > zero_tol * np.max(np.abs(M))).sum(axis=0) >= 2):
            notes.append(f"generator {i}: non-orthogonal mixing matrix; Empty is a derived ruling")
    return ClassificationReport(labels, meet, zero_tol, notes)


# ---------------------------------------------------------------------------
# Empirical invariance check
# ---------------------------------------------------------------------------

KS_SIGNIFICANCE = 1e-3


def ks_threshold(n: int, m: int, significance: float = KS_SIGNIFICANCE) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical distance."""
    c = np.sqrt(-np.log(significance / 2.0) / 2.0)
    return float(c * np.sqrt((n + m) / (n * m)))


@dataclass
class InvarianceReport:
    distances: list
    threshold: float
    n_reps: int
    passed: bool

    def to_json(self) -> dict:
        return {"distances": self.distances, "threshold": self.threshold, "n_reps": self.n_reps,
                "passed": self.passed}


def empirical_invariance_check(A, dgp, n_reps: int = 100_000, seed: int | None = 0,
                               significance: float = KS_SIGNIFICANCE) -> InvarianceReport:
    """Compare each coordinate of ``A X`` with a fresh independent ``X``.

    ``dgp`` is a name from the built-in panel or a callable
    ``(rng, size) -> array``.  Each coordinate is scored by the two-sample
    Kolmogorov-Smirnov distance; the check passes when every distance is
    below the critical value at ``significance``.
    """
    A = _as_matrix(A)
    draw = get_dgp(dgp)
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    X = draw(rng, (n_reps, n))
    ref = draw(rng, (n_reps, n))
    AX = X @ A.T
    dist = [float(ks_2samp(AX[:, i], ref[:, i]).statistic) for i in range(n)]
    thr = ks_threshold(n_reps, n_reps, significance)
    return InvarianceReport(dist, thr, n_reps, all(d <= thr for d in dist))
