"""Estimator-style front end over the functional solver."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .datasets import HyperParams, labels_from_onehot
from .exceptions import ValidationError
from .metrics import evaluate_gzsl, evaluate_standard
from .solver import assignment_costs, fit as solver_fit, update_Cu, update_Cu_gzsl


class ZeroShotPrototypeClassifier(BaseEstimator):
    """Zero-shot recognition via coupled prototype and dictionary learning.

    The model learns one visual prototype per class together with a pair of
    dictionaries, one over visual prototypes and one over class semantics,
    that share their codes.  Candidate-class prototypes are inferred from
    semantics alone through the shared codes, and in the transductive modes
    they are refined against the unlabeled test pool itself.

    All matrices follow the library convention of one sample per column.

    Parameters
    ----------
    rho, omega, alpha : float in [0, 1)
        Bounded trade-off weights: rho balances the two-way encoding terms
        against prototype reconstruction, omega weighs the semantic
        alignment, alpha the influence of the unlabeled pool.
    theta : float in (0, 1] or None
        Dictionary size as a fraction of the total class count.  None uses
        m / (m + n), the share of seen classes.
    mode : {"transductive", "inductive", "gzsl"}
        transductive refines candidate prototypes on the pool; inductive
        never looks at pool features until prediction; gzsl scores the pool
        against seen and candidate classes jointly.
    epsilon : float
        Outer-loop convergence threshold on the dictionary change norms.
    max_outer, max_inner_unseen, max_inner_seen : int
        Iteration budgets for the outer alternation and the two stages.
    ridge_tau : float or None
        Ridge added to the code solves; None picks 1e-8 * trace(G) / q.
    init_strategy : {"class-mean", "kmeans", "sample"}
        Prototype seeding rule.
    kmeans_restarts : int
        Restarts of the semantic clustering used to seed the dictionaries.
    seed : int
        Seed for every random choice in the fit.

    Attributes
    ----------
    state_ : ModelState
        All fitted matrices (prototypes, dictionaries, codes, assignment).
    history_ : FitHistory
        Objective and convergence trace of the outer loop.
    labels_ : ndarray
        Predicted 1-based labels for the pool passed to fit.
    """

    def __init__(self, rho=0.6, omega=0.5, alpha=0.6, theta=None, mode="transductive",
                 epsilon=1e-4, max_outer=100, max_inner_unseen=50, max_inner_seen=50,
                 ridge_tau=None, init_strategy="class-mean", kmeans_restarts=4, seed=0):
        self.rho = rho
        self.omega = omega
        self.alpha = alpha
        self.theta = theta
        self.mode = mode
        self.epsilon = epsilon
        self.max_outer = max_outer
        self.max_inner_unseen = max_inner_unseen
        self.max_inner_seen = max_inner_seen
        self.ridge_tau = ridge_tau
        self.init_strategy = init_strategy
        self.kmeans_restarts = kmeans_restarts
        self.seed = seed

    def hyperparams(self, seen=None, unseen=None):
        """Resolve the constructor arguments into a validated HyperParams."""
        theta = self.theta
        if theta is None:
            if seen is None or unseen is None:
                raise ValidationError("theta=None resolves from data; pass the datasets")
            m, n = seen.num_classes, unseen.num_classes
            theta = m / (m + n)
        return HyperParams(
            rho=self.rho, omega=self.omega, alpha=self.alpha, theta=theta,
            mode=self.mode, epsilon=self.epsilon, max_outer=self.max_outer,
            max_inner_unseen=self.max_inner_unseen, max_inner_seen=self.max_inner_seen,
            ridge_tau=self.ridge_tau, init_strategy=self.init_strategy,
            kmeans_restarts=self.kmeans_restarts, seed=self.seed,
        )

    def fit(self, seen, unseen):
        """Fit on a LabeledFeatureSet and the UnlabeledFeatureSet pool."""
        hp = self.hyperparams(seen, unseen)
        self.state_, self.history_ = solver_fit(seen, unseen, hp)
        self.labels_ = labels_from_onehot(self.state_.C_u)
        self.num_seen_classes_ = seen.num_classes
        self.num_candidate_classes_ = unseen.num_classes
        return self

    def predict(self, X=None):
        """Labels for the fitted pool, or assignments for new columns X."""
        check_is_fitted(self, "state_")
        if X is None:
            return self.labels_.copy()
        if self.mode == "gzsl":
            C = update_Cu_gzsl(X, self.state_.P_s, self.state_.P_u)
        else:
            C = update_Cu(X, self.state_.P_u)
        return labels_from_onehot(C)

    def decision_scores(self, X):
        """Per-class scores (negated assignment costs) for columns X, classes x N."""
        check_is_fitted(self, "state_")
        if self.mode == "gzsl":
            P = np.hstack([self.state_.P_s, self.state_.P_u])
        else:
            P = self.state_.P_u
        return -assignment_costs(X, P)

    def score(self, truth=None, unseen=None):
        """Mean per-class accuracy of the transductive labels against truth."""
        check_is_fitted(self, "state_")
        if truth is None:
            if unseen is None or unseen.truth is None:
                raise ValidationError("no truth labels available to score against")
            truth = unseen.truth
        if self.mode == "gzsl":
            report = evaluate_gzsl(self.labels_, truth,
                                   self.num_seen_classes_, self.num_candidate_classes_)
            return report.harmonic_mean
        return evaluate_standard(self.labels_, truth).acc_unseen
