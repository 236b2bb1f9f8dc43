"""Cost terms of the joint prototype/dictionary objective.

The model couples two ideas.  Encoding cost asks that prototypes act as a
two-way code between features and class indicators: for each sample x with
one-hot code c, both ||P^T x - c||^2 and ||x - P c||^2 should be small.
Alignment cost ties the visual prototypes and the semantic prototypes to a
shared dictionary pair through common codes Z:
||P - D_v Z||_F^2 + lambda ||Y - D_c Z||_F^2.
"""

import numpy as np

from .exceptions import ValidationError
from .linalg import as_matrix


def _sq(A):
    return float(np.sum(A * A))


def _encoding(X, C, P, what):
    X = as_matrix(X, "%s features" % what)
    C = as_matrix(C, "%s assignment" % what)
    P = as_matrix(P, "%s prototypes" % what)
    if P.shape[0] != X.shape[0]:
        raise ValidationError("prototypes are %d-dimensional but features are %d" % (P.shape[0], X.shape[0]))
    if C.shape != (P.shape[1], X.shape[1]):
        raise ValidationError(
            "assignment must be %d x %d, got %s" % (P.shape[1], X.shape[1], (C.shape,))
        )
    return _sq(P.T @ X - C) + _sq(X - P @ C)


def encoding_cost_seen(X, C, P):
    """Two-way encoding cost of labeled samples against class prototypes."""
    return _encoding(X, C, P, "seen")


def encoding_cost_unseen(X, C, P):
    """Identical kernel to encoding_cost_seen, applied to the pool assignment."""
    return _encoding(X, C, P, "unseen")


def encoding_cost_gzsl(X, C, P_s, P_u):
    """Encoding cost when the pool is scored against both vocabularies jointly."""
    P_s = as_matrix(P_s, "seen prototypes")
    P_u = as_matrix(P_u, "unseen prototypes")
    if P_s.shape[0] != P_u.shape[0]:
        raise ValidationError(
            "prototype blocks disagree: %d vs %d rows" % (P_s.shape[0], P_u.shape[0])
        )
    return _encoding(X, C, np.hstack([P_s, P_u]), "pool")


def alignment_cost(P, Y, D_v, D_c, Z, lam):
    """||P - D_v Z||_F^2 + lam * ||Y - D_c Z||_F^2."""
    P = as_matrix(P, "prototypes")
    Y = as_matrix(Y, "semantics")
    D_v = as_matrix(D_v, "D_v")
    D_c = as_matrix(D_c, "D_c")
    Z = as_matrix(Z, "codes")
    if lam < 0.0:
        raise ValidationError("lam must be nonnegative, got %g" % lam)
    if D_v.shape[1] != Z.shape[0] or D_c.shape[1] != Z.shape[0]:
        raise ValidationError(
            "dictionaries have %d and %d atoms but codes have %d rows"
            % (D_v.shape[1], D_c.shape[1], Z.shape[0])
        )
    if P.shape != (D_v.shape[0], Z.shape[1]) or Y.shape != (D_c.shape[0], Z.shape[1]):
        raise ValidationError("prototype/semantic shapes do not conform with the dictionaries and codes")
    return _sq(P - D_v @ Z) + lam * _sq(Y - D_c @ Z)


def total_objective(state, seen, unseen, hp):
    """Full objective value at ``state`` under the internal (beta, lam, gamma) weights.

    beta * enc_seen + align_seen + gamma * (beta * enc_pool + align_pool),
    where the pool encoding term is dropped in inductive mode and scored
    against the concatenated vocabularies in gzsl mode.  Dictionary columns
    must lie inside the unit ball.
    """
    state.validate_feasible()
    beta, lam, gamma = hp.beta, hp.lam, hp.gamma
    seen_enc = encoding_cost_seen(seen.features, seen.onehot, state.P_s)
    seen_align = alignment_cost(state.P_s, seen.semantics, state.D_v, state.D_c, state.Z_s, lam)
    pool_align = alignment_cost(state.P_u, unseen.semantics, state.D_v, state.D_c, state.Z_u, lam)
    if hp.mode == "inductive":
        pool_enc = 0.0
    elif hp.mode == "gzsl":
        pool_enc = encoding_cost_gzsl(unseen.features, state.C_u, state.P_s, state.P_u)
    else:
        pool_enc = encoding_cost_unseen(unseen.features, state.C_u, state.P_u)
    return beta * seen_enc + seen_align + gamma * (beta * pool_enc + pool_align)


def total_objective_bounded(state, seen, unseen, hp):
    """Same objective expressed with the bounded (rho, omega, alpha) weights.

    Multiplying every term of total_objective by (1-rho)(1-omega)(1-alpha)
    turns each weight product into a polynomial in the bounded parameters:

        rho (1-omega)(1-alpha)   * enc_seen
      + (1-rho)(1-omega)(1-alpha) * ||P_s - D_v Z_s||^2
      + omega (1-rho)(1-alpha)   * ||Y_s - D_c Z_s||^2
      + rho alpha (1-omega)      * enc_pool
      + alpha (1-rho)(1-omega)   * ||P_u - D_v Z_u||^2
      + omega alpha (1-rho)      * ||Y_u - D_c Z_u||^2

    so total_objective_bounded == (1-rho)(1-omega)(1-alpha) * total_objective
    identically.  Useful for checking the reparameterization and for
    comparing runs on the bounded scale.
    """
    state.validate_feasible()
    rho, omega, alpha = hp.rho, hp.omega, hp.alpha
    seen_enc = encoding_cost_seen(seen.features, seen.onehot, state.P_s)
    seen_vis = _sq(state.P_s - state.D_v @ state.Z_s)
    seen_sem = _sq(seen.semantics - state.D_c @ state.Z_s)
    pool_vis = _sq(state.P_u - state.D_v @ state.Z_u)
    pool_sem = _sq(unseen.semantics - state.D_c @ state.Z_u)
    if hp.mode == "inductive":
        pool_enc = 0.0
    elif hp.mode == "gzsl":
        pool_enc = encoding_cost_gzsl(unseen.features, state.C_u, state.P_s, state.P_u)
    else:
        pool_enc = encoding_cost_unseen(unseen.features, state.C_u, state.P_u)
    return (
        rho * (1 - omega) * (1 - alpha) * seen_enc
        + (1 - rho) * (1 - omega) * (1 - alpha) * seen_vis
        + omega * (1 - rho) * (1 - alpha) * seen_sem
        + rho * alpha * (1 - omega) * pool_enc
        + alpha * (1 - rho) * (1 - omega) * pool_vis
        + omega * alpha * (1 - rho) * pool_sem
    )
