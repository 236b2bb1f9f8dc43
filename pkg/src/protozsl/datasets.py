"""Dataset containers, hyperparameters, and solver state.

All feature and prototype matrices store one sample (or class) per column.
Class labels are 1-based throughout: seen classes are 1..m, unseen classes
1..n in their own index space, and m+1..m+n when both vocabularies are
scored together.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .linalg import as_matrix

MODES = ("transductive", "inductive", "gzsl")
INIT_STRATEGIES = ("class-mean", "kmeans", "sample")

# tolerated deviation from unit norm for feature columns
UNIT_NORM_ATOL = 1e-10
# dictionary columns may exceed the unit ball by at most this much
BALL_ATOL = 1e-10


def onehot_from_labels(labels, num_classes):
    """Build a num_classes x N one-hot matrix from 1-based labels."""
    labels = _check_labels(labels, "labels")
    if labels.size and labels.max() > num_classes:
        raise ValidationError(
            "label out of range: %d exceeds the %d classes" % (labels.max(), num_classes)
        )
    C = np.zeros((num_classes, labels.size))
    C[labels - 1, np.arange(labels.size)] = 1.0
    return C


def labels_from_onehot(C):
    """Recover 1-based labels from a one-hot assignment matrix."""
    return np.argmax(C, axis=0) + 1


def _check_labels(labels, name):
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValidationError("%s must be a 1-d sequence" % name)
    if arr.size and not np.all(arr == np.floor(arr)):
        raise ValidationError("%s must contain integers" % name)
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 1:
        raise ValidationError("%s must be 1-based, found %d" % (name, arr.min()))
    return arr


def _check_unit_columns(X, name):
    norms = np.linalg.norm(X, axis=0)
    off = np.abs(norms - 1.0)
    if off.size and off.max() > UNIT_NORM_ATOL:
        j = int(np.argmax(off))
        raise ValidationError(
            "%s column %d has norm %.12f; feature columns must be unit-normalized "
            "(set the manifest normalize flag or rescale)" % (name, j, norms[j])
        )


@dataclass(frozen=True)
class LabeledFeatureSet:
    """Seen-class training data: features, labels, one-hot codes, semantics."""

    features: np.ndarray   # d x N, unit-norm columns
    labels: np.ndarray     # N integers in 1..m
    onehot: np.ndarray     # m x N
    semantics: np.ndarray  # k x m, one semantic prototype per class
    class_names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "features", as_matrix(self.features, "features"))
        object.__setattr__(self, "labels", _check_labels(self.labels, "labels"))
        object.__setattr__(self, "onehot", as_matrix(self.onehot, "onehot"))
        object.__setattr__(self, "semantics", as_matrix(self.semantics, "semantics"))
        m = self.semantics.shape[1]
        if self.labels.size != self.features.shape[1]:
            raise ValidationError("got %d labels for %d samples" % (self.labels.size, self.features.shape[1]))
        if self.labels.size == 0:
            raise ValidationError("labeled set must contain at least one sample")
        if self.labels.max() > m:
            raise ValidationError(
                "label out of range: %d exceeds the %d classes in semantics" % (self.labels.max(), m)
            )
        counts = np.bincount(self.labels, minlength=m + 1)[1:]
        if counts.min() == 0:
            raise ValidationError("class %d has zero samples" % (int(np.argmin(counts)) + 1))
        if self.onehot.shape != (m, self.labels.size):
            raise ValidationError("onehot must be %d x %d, got %s" % (m, self.labels.size, (self.onehot.shape,)))
        expected = onehot_from_labels(self.labels, m)
        if not np.array_equal(self.onehot, expected):
            raise ValidationError("onehot does not match labels")
        _check_unit_columns(self.features, "features")
        if self.class_names is not None:
            names = tuple(self.class_names)
            if len(names) != m:
                raise ValidationError("expected %d class names, got %d" % (m, len(names)))
            object.__setattr__(self, "class_names", names)

    @classmethod
    def from_labels(cls, features, labels, semantics, class_names=None):
        labels = _check_labels(labels, "labels")
        semantics = as_matrix(semantics, "semantics")
        onehot = onehot_from_labels(labels, semantics.shape[1])
        return cls(features, labels, onehot, semantics, class_names)

    @property
    def dim(self):
        return self.features.shape[0]

    @property
    def num_samples(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return self.semantics.shape[1]

    @property
    def semantic_dim(self):
        return self.semantics.shape[0]


@dataclass(frozen=True)
class UnlabeledFeatureSet:
    """Test-time pool: features, candidate-class semantics, optional ground truth."""

    features: np.ndarray   # d x N_u, unit-norm columns
    semantics: np.ndarray  # k x n, one prototype per candidate class
    truth: np.ndarray = None
    class_names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "features", as_matrix(self.features, "features"))
        object.__setattr__(self, "semantics", as_matrix(self.semantics, "semantics"))
        if self.features.shape[1] == 0:
            raise ValidationError("unlabeled set must contain at least one sample")
        _check_unit_columns(self.features, "features")
        if self.truth is not None:
            truth = _check_labels(self.truth, "truth")
            if truth.size != self.features.shape[1]:
                raise ValidationError("got %d truth labels for %d samples" % (truth.size, self.features.shape[1]))
            object.__setattr__(self, "truth", truth)
        if self.class_names is not None:
            names = tuple(self.class_names)
            if len(names) != self.semantics.shape[1]:
                raise ValidationError(
                    "expected %d class names, got %d" % (self.semantics.shape[1], len(names))
                )
            object.__setattr__(self, "class_names", names)

    @property
    def dim(self):
        return self.features.shape[0]

    @property
    def num_samples(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return self.semantics.shape[1]

    @property
    def semantic_dim(self):
        return self.semantics.shape[0]


def check_pair(seen, unseen):
    """Validate that a seen/unseen pair shares feature and semantic dimensions."""
    if seen.dim != unseen.dim:
        raise ValidationError(
            "dimension mismatch: seen features are %d-dimensional, unseen are %d" % (seen.dim, unseen.dim)
        )
    if seen.semantic_dim != unseen.semantic_dim:
        raise ValidationError(
            "dimension mismatch: seen semantics are %d-dimensional, unseen are %d"
            % (seen.semantic_dim, unseen.semantic_dim)
        )


@dataclass(frozen=True)
class HyperParams:
    """Solver configuration.

    rho, omega, and alpha are the bounded trade-off weights on the
    reconstruction, semantic, and unseen-pool terms; each lives in [0, 1)
    and maps to an unbounded internal weight x / (1 - x).  theta in (0, 1]
    sets the dictionary size as a fraction of the total class count.
    ridge_tau None means the adaptive default 1e-8 * trace(G) / q for each
    Gram system G.
    """

    rho: float = 0.6
    omega: float = 0.5
    alpha: float = 0.6
    theta: float = 0.6
    mode: str = "transductive"
    epsilon: float = 1e-4
    max_outer: int = 100
    max_inner_unseen: int = 50
    max_inner_seen: int = 50
    ridge_tau: float = None
    init_strategy: str = "class-mean"
    kmeans_restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("rho", "omega", "alpha"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValidationError("%s must lie in [0, 1), got %g" % (name, v))
        if not 0.0 < self.theta <= 1.0:
            raise ValidationError("theta must lie in (0, 1], got %g" % self.theta)
        if self.mode not in MODES:
            raise ValidationError("mode must be one of %s, got %r" % (", ".join(MODES), self.mode))
        if self.epsilon <= 0.0:
            raise ValidationError("epsilon must be positive, got %g" % self.epsilon)
        for name in ("max_outer", "max_inner_unseen", "max_inner_seen"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValidationError("%s must be a nonnegative integer, got %r" % (name, v))
        if self.ridge_tau is not None and self.ridge_tau < 0.0:
            raise ValidationError("ridge_tau must be nonnegative, got %g" % self.ridge_tau)
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValidationError(
                "init_strategy must be one of %s, got %r" % (", ".join(INIT_STRATEGIES), self.init_strategy)
            )
        if not isinstance(self.kmeans_restarts, (int, np.integer)) or self.kmeans_restarts < 1:
            raise ValidationError("kmeans_restarts must be a positive integer, got %r" % (self.kmeans_restarts,))
        if not isinstance(self.seed, (int, np.integer)):
            raise ValidationError("seed must be an integer, got %r" % (self.seed,))

    @property
    def beta(self):
        return self.rho / (1.0 - self.rho)

    @property
    def lam(self):
        return self.omega / (1.0 - self.omega)

    @property
    def gamma(self):
        return self.alpha / (1.0 - self.alpha)

    def atom_count(self, m, n):
        """Number of dictionary atoms q = max(1, round(theta * (m + n)))."""
        q = max(1, int(math.floor(self.theta * (m + n) + 0.5)))
        if q > m + n:
            raise ValidationError("atom count %d exceeds the %d total classes" % (q, m + n))
        return q


@dataclass
class ModelState:
    """All matrices produced by a fit.

    P_s / P_u hold per-class visual prototypes for the seen and candidate
    vocabularies, D_v / D_c the shared visual and semantic dictionaries
    (columns inside the unit ball), Z_s / Z_u the dictionary codes, and C_u
    the one-hot assignment of every pool sample to a candidate class.
    """

    P_s: np.ndarray
    P_u: np.ndarray
    D_v: np.ndarray
    D_c: np.ndarray
    Z_s: np.ndarray
    Z_u: np.ndarray
    C_u: np.ndarray

    def validate_feasible(self):
        for name in ("D_v", "D_c"):
            D = getattr(self, name)
            norms = np.linalg.norm(D, axis=0)
            if norms.size and norms.max() > 1.0 + BALL_ATOL:
                j = int(np.argmax(norms))
                raise ValidationError(
                    "%s column %d has norm %.12f, outside the unit ball" % (name, j, norms[j])
                )

    def matrices(self):
        return {
            "P_s": self.P_s, "P_u": self.P_u, "D_v": self.D_v, "D_c": self.D_c,
            "Z_s": self.Z_s, "Z_u": self.Z_u, "C_u": self.C_u,
        }


@dataclass
class FitHistory:
    """Per-outer-iteration trace of a fit."""

    objective_per_outer: list = field(default_factory=list)
    err1_per_outer: list = field(default_factory=list)
    err2_per_outer: list = field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False
