"""Block-coordinate solver for the joint prototype/dictionary objective.

The fit alternates two stages.  The unseen stage assigns every pool sample
to a candidate class, refits the candidate prototypes, and re-encodes them
over the dictionaries.  The seen stage refits codes and prototypes for the
labeled classes and then takes projected-gradient steps on the two
dictionaries.  Every block update below either solves its subproblem in
closed form or performs a monotone line search, so the overall objective
never increases.

Closed forms (found by setting the block gradient to zero):

  codes Z     (D_v^T D_v + lam D_c^T D_c + tau I) Z = D_v^T P + lam D_c^T Y
  prototypes  (X X^T) P + P (C C^T + I/beta) = 2 X C^T + (D_v Z)/beta
  assignment  per sample argmin_j ||x - p_j||^2 - 2 (P^T x)_j, smallest
              index on ties (the remaining encoding terms do not depend on j)
"""

from dataclasses import dataclass, replace

import numpy as np
from sklearn.cluster import KMeans

from .datasets import (FitHistory, HyperParams, ModelState, check_pair,
                       labels_from_onehot, onehot_from_labels)
from .exceptions import ValidationError
from .linalg import (LineSearch, as_matrix, gram_ridge_solve, normalize_columns,
                     project_columns_unit_ball, projected_descent, solve_sylvester_spd,
                     symmetric_eig)
from .objectives import (alignment_cost, encoding_cost_gzsl, encoding_cost_seen,
                         encoding_cost_unseen, total_objective)

# relative-decrease threshold for the inner alternations; loose inner
# stops leave the dictionaries drifting above typical outer tolerances,
# so the inner loops run essentially to their fixed points
INNER_TOL = 1e-9
# scale of the adaptive ridge: tau = RIDGE_SCALE * trace(G) / q
RIDGE_SCALE = 1e-8
# consecutive outer iterations without an Err decrease before the fit
# gives up; any decrease over the previous iteration resets the count,
# since Err is not monotone near a fixed point
OUTER_STALL_LIMIT = 5


@dataclass
class SolveReport:
    inner_iterations: int
    objective_trace: list
    stalled: bool = False


@dataclass(frozen=True)
class InitStrategy:
    """How to seed the class prototypes before the first sweep."""

    kind: str = "class-mean"
    kmeans_restarts: int = 4

    def __post_init__(self):
        from .datasets import INIT_STRATEGIES
        if self.kind not in INIT_STRATEGIES:
            raise ValidationError("unknown init strategy %r" % (self.kind,))
        if self.kmeans_restarts < 1:
            raise ValidationError("kmeans_restarts must be at least 1")


def _resolve_tau(G, tau):
    if tau is not None:
        return float(tau)
    q = G.shape[0]
    return RIDGE_SCALE * float(np.trace(G)) / q if q else 0.0


def update_Z(P, Y, D_v, D_c, lam, tau=None):
    """Closed-form code update: ridge solve of the stacked alignment system."""
    G = D_v.T @ D_v + lam * (D_c.T @ D_c)
    R = D_v.T @ P + lam * (D_c.T @ Y)
    return gram_ridge_solve(G, R, _resolve_tau(G, tau))


def update_P_sylvester(X, C, D_v, Z, beta, a_eig=None):
    """Closed-form prototype update via a Sylvester solve.

    Minimizes beta * (||P^T X - C||^2 + ||X - P C||^2) + ||P - D_v Z||^2.
    C C^T is diagonal (per-class sample counts) whenever C is one-hot, so
    both operands are symmetric and the PD shift I/beta keeps the system
    well posed even for empty X.
    """
    X = as_matrix(X, "features")
    C = as_matrix(C, "assignment")
    if beta <= 0.0:
        raise ValidationError("beta must be positive, got %g" % beta)
    A = X @ X.T
    r = C.shape[0]
    B = C @ C.T + np.eye(r) / beta
    R = 2.0 * (X @ C.T) + (D_v @ Z) / beta
    return solve_sylvester_spd(A, B, R, a_eig=a_eig)


def assignment_costs(X, P):
    """Per-class encoding cost of each sample, one row per candidate class.

    cost[j, i] = ||P^T x_i - e_j||^2 + ||x_i - p_j||^2, expanded so the
    whole matrix comes out of three matrix products.  Lower is better.
    """
    X = as_matrix(X, "features")
    P = as_matrix(P, "prototypes")
    if X.shape[0] != P.shape[0]:
        raise ValidationError("features are %d-dimensional but prototypes are %d" % (X.shape[0], P.shape[0]))
    S = P.T @ X
    code_sq = np.sum(S * S, axis=0)
    x_sq = np.sum(X * X, axis=0)
    p_sq = np.sum(P * P, axis=0)
    dist_sq = x_sq[None, :] - 2.0 * S + p_sq[:, None]
    return (code_sq + 1.0)[None, :] - 2.0 * S + dist_sq


def update_Cu(X, P_u):
    """Exact assignment: each pool sample takes the cheapest candidate class."""
    costs = assignment_costs(X, P_u)
    return onehot_from_labels(np.argmin(costs, axis=0) + 1, P_u.shape[1])


def update_Cu_gzsl(X, P_s, P_u):
    """Assignment against the concatenated seen + candidate vocabularies.

    Ties (for example duplicated prototypes) resolve to the seen copy
    because seen classes come first in the concatenation.
    """
    return update_Cu(X, np.hstack([P_s, P_u]))


def update_Pu_gzsl(X, C, P_s, D_v, Z_u, beta, a_eig=None):
    """Candidate-prototype update when assignments span both vocabularies.

    C stacks seen rows over candidate rows.  With P_s held fixed, zeroing
    the gradient in P_u gives the Sylvester system
    (X X^T) P_u + P_u (Cu Cu^T + I/beta)
        = X Cu^T + (X - P_s Cs) Cu^T + (D_v Z_u)/beta
    where Cs / Cu are the seen / candidate row blocks.
    """
    X = as_matrix(X, "features")
    C = as_matrix(C, "assignment")
    P_s = as_matrix(P_s, "seen prototypes")
    if beta <= 0.0:
        raise ValidationError("beta must be positive, got %g" % beta)
    m = P_s.shape[1]
    if C.shape[0] <= m:
        raise ValidationError("assignment has %d rows but there are %d seen classes" % (C.shape[0], m))
    C_seen, C_cand = C[:m], C[m:]
    A = X @ X.T
    n = C_cand.shape[0]
    B = C_cand @ C_cand.T + np.eye(n) / beta
    R = X @ C_cand.T + (X - P_s @ C_seen) @ C_cand.T + (D_v @ Z_u) / beta
    return solve_sylvester_spd(A, B, R, a_eig=a_eig)


def update_D(D, Z_s, Z_u, T_s, T_u, gamma, ls=None):
    """Projected-gradient dictionary update under unit-ball columns.

    Descends f(D) = ||T_s - D Z_s||^2 + gamma ||T_u - D Z_u||^2 with
    gradient 2 (D Z_s - T_s) Z_s^T + 2 gamma (D Z_u - T_u) Z_u^T, projecting
    every trial point's columns back into the unit ball.  Returns the new
    dictionary and the DescentResult carrying the trace and stall flag.
    """
    if gamma < 0.0:
        raise ValidationError("gamma must be nonnegative, got %g" % gamma)
    ls = ls or LineSearch()

    def f(Dm):
        Rs = T_s - Dm @ Z_s
        Ru = T_u - Dm @ Z_u
        return np.sum(Rs * Rs) + gamma * np.sum(Ru * Ru)

    def g(Dm):
        return 2.0 * (Dm @ Z_s - T_s) @ Z_s.T + 2.0 * gamma * (Dm @ Z_u - T_u) @ Z_u.T

    res = projected_descent(f, g, D, project_columns_unit_ball,
                            step0=ls.step0, shrink=ls.shrink, c1=ls.c1,
                            max_steps=ls.max_steps, tol=ls.tol)
    return res.x, res


def predict_inductive(D_v, D_c, Y_u, X_u, lam, tau=None):
    """Inductive path: encode candidate semantics, decode prototypes, assign.

    Z_u solves the semantic ridge system (lam D_c^T D_c + tau I) Z = lam
    D_c^T Y_u, P_u = D_v Z_u, and each sample takes the cheapest prototype.
    Returns (P_u, C_u, Z_u).
    """
    G = lam * (D_c.T @ D_c)
    R = lam * (D_c.T @ Y_u)
    Z_u = gram_ridge_solve(G, R, _resolve_tau(G, tau))
    P_u = D_v @ Z_u
    return P_u, update_Cu(X_u, P_u), Z_u


def _relative_drop(prev, cur):
    return (prev - cur) / max(1.0, abs(prev))


def solve_unseen(D_v, D_c, unseen, hp, warm=None, P_s=None, a_eig=None, on_block=None):
    """Minimize the pool stage with the dictionaries held fixed.

    Alternates assignment -> prototypes -> codes until the relative
    objective decrease falls below 1e-9 or hp.max_inner_unseen sweeps.
    Each assignment step ends with an objective-gated rescue of candidate
    classes that own no samples (see rescue_empty below), so a class can
    recover from an empty assignment without ever breaking descent.
    A cold start (warm=None) comes from predict_inductive.  In gzsl mode
    the fixed seen prototypes P_s are required and both the assignment and
    the prototype update score the concatenated vocabularies.  Returns
    (P_u, C_u, Z_u, SolveReport).
    """
    gzsl = hp.mode == "gzsl"
    if gzsl and P_s is None:
        raise ValidationError("gzsl mode requires the seen prototypes")
    X, Y = unseen.features, unseen.semantics
    beta, lam = hp.beta, hp.lam
    if a_eig is None:
        a_eig = symmetric_eig(X @ X.T)
    if warm is None:
        P_u, C_u, Z_u = predict_inductive(D_v, D_c, Y, X, lam, hp.ridge_tau)
        if gzsl:
            C_u = update_Cu_gzsl(X, P_s, P_u)
    else:
        P_u, C_u, Z_u = warm

    def assign(P):
        return update_Cu_gzsl(X, P_s, P) if gzsl else update_Cu(X, P)

    def objective(P, C, Z):
        enc = encoding_cost_gzsl(X, C, P_s, P) if gzsl else encoding_cost_unseen(X, C, P)
        return beta * enc + alignment_cost(P, Y, D_v, D_c, Z, lam)

    offset = P_s.shape[1] if gzsl else 0

    def rescue_empty(P, C, Z):
        # A candidate class that owns no pool samples is an absorbing
        # state: the prototype update shrinks its unsupported column toward
        # the dictionary prior, after which the assignment step prefers the
        # supported columns even more.  Reseed each empty class onto the
        # worst-served sample, keeping the move only when reassignment
        # lowers the stage objective, so the descent stays monotone.
        cur = objective(P, C, Z)
        for _ in range(P.shape[1]):
            counts = C[offset:].sum(axis=1)
            empties = np.flatnonzero(counts == 0.0)
            if empties.size == 0:
                break
            costs = assignment_costs(X, np.hstack([P_s, P]) if gzsl else P)
            assigned = np.sum(costs * C, axis=0)
            P_try = P.copy()
            P_try[:, int(empties[0])] = X[:, int(np.argmax(assigned))]
            C_try = assign(P_try)
            val = objective(P_try, C_try, Z)
            if not val < cur:
                break
            P, C, cur = P_try, C_try, val
        return P, C

    trace = [objective(P_u, C_u, Z_u)]
    sweeps = 0
    for _ in range(hp.max_inner_unseen):
        C_u = assign(P_u)
        P_u, C_u = rescue_empty(P_u, C_u, Z_u)
        if on_block:
            on_block("C_u", (P_u, C_u, Z_u))
        if gzsl:
            P_u = update_Pu_gzsl(X, C_u, P_s, D_v, Z_u, beta, a_eig=a_eig)
        else:
            P_u = update_P_sylvester(X, C_u, D_v, Z_u, beta, a_eig=a_eig)
        if on_block:
            on_block("P_u", (P_u, C_u, Z_u))
        Z_u = update_Z(P_u, Y, D_v, D_c, lam, hp.ridge_tau)
        if on_block:
            on_block("Z_u", (P_u, C_u, Z_u))
        sweeps += 1
        trace.append(objective(P_u, C_u, Z_u))
        if _relative_drop(trace[-2], trace[-1]) < INNER_TOL:
            break
    return P_u, C_u, Z_u, SolveReport(inner_iterations=sweeps, objective_trace=trace)


def _class_means(seen):
    X, C = seen.features, seen.onehot
    counts = C.sum(axis=1)
    return (X @ C.T) / counts[None, :]


def _init_prototypes(seen, strategy, rng):
    if strategy.kind == "sample":
        cols = np.empty((seen.dim, seen.num_classes))
        for j in range(seen.num_classes):
            members = np.flatnonzero(seen.labels == j + 1)
            cols[:, j] = seen.features[:, rng.choice(members)]
        return normalize_columns(cols, "prototype init")
    # "kmeans" runs within-class clustering with a single centroid per
    # class, which is exactly the class mean, so both remaining strategies
    # share the mean computation.
    return normalize_columns(_class_means(seen), "prototype init")


def _init_dictionaries(seen, Y_u, hp):
    """Seed P_s, D_v, D_c from class means and semantic clustering.

    The semantic prototypes of all classes are clustered into q groups;
    the cluster centers become D_c and the per-cluster means of the seen
    visual prototypes become D_v, so that matching atoms describe the same
    group of classes in both spaces.
    """
    m = seen.num_classes
    n = Y_u.shape[1]
    q = hp.atom_count(m, n)
    rng = np.random.default_rng(hp.seed)
    strategy = InitStrategy(hp.init_strategy, hp.kmeans_restarts)
    P_s = _init_prototypes(seen, strategy, rng)
    points = np.hstack([seen.semantics, Y_u]).T
    km = KMeans(n_clusters=q, n_init=hp.kmeans_restarts, random_state=hp.seed)
    groups = km.fit_predict(points)
    D_c = project_columns_unit_ball(km.cluster_centers_.T)
    A = np.zeros((m, q))
    seenless = []
    for j in range(q):
        members = np.flatnonzero(groups[:m] == j)
        if members.size:
            A[members, j] = 1.0 / members.size
        else:
            seenless.append(j)
    D_v = P_s @ A
    if seenless:
        # An atom whose semantic cluster holds no seen class gets nothing
        # from the member average.  Decode its center through the min-norm
        # least-squares map from seen semantics to seen prototypes instead,
        # so the atom starts near the visual region its semantics describe.
        W = np.linalg.lstsq(seen.semantics.T, P_s.T, rcond=None)[0].T
        D_v[:, seenless] = W @ D_c[:, seenless]
    D_v = project_columns_unit_ball(D_v)
    return P_s, D_v, D_c


def solve_seen(seen, P_u, Z_u, unseen_semantics, hp, warm=None, a_eig=None, on_block=None):
    """Minimize the labeled stage with the pool prototypes and codes held fixed.

    Sweeps codes -> prototypes -> visual dictionary -> semantic dictionary
    until the relative objective decrease falls below 1e-9 or
    hp.max_inner_seen sweeps.  With alpha = 0 the pool terms carry zero
    weight and the result does not depend on P_u, Z_u at all.  Returns
    (P_s, Z_s, D_v, D_c, SolveReport).
    """
    X, C, Y = seen.features, seen.onehot, seen.semantics
    P_u = as_matrix(P_u, "pool prototypes")
    Z_u = as_matrix(Z_u, "pool codes")
    Y_u = as_matrix(unseen_semantics, "pool semantics")
    beta, lam, gamma = hp.beta, hp.lam, hp.gamma
    if a_eig is None:
        a_eig = symmetric_eig(X @ X.T)
    if warm is None:
        P_s, D_v, D_c = _init_dictionaries(seen, Y_u, hp)
        Z_s = update_Z(P_s, Y, D_v, D_c, lam, hp.ridge_tau)
    else:
        P_s, Z_s, D_v, D_c = warm

    def objective(P, Z, Dv, Dc):
        return (beta * encoding_cost_seen(X, C, P)
                + alignment_cost(P, Y, Dv, Dc, Z, lam)
                + gamma * alignment_cost(P_u, Y_u, Dv, Dc, Z_u, lam))

    trace = [objective(P_s, Z_s, D_v, D_c)]
    sweeps = 0
    stalled = False
    for _ in range(hp.max_inner_seen):
        Z_s = update_Z(P_s, Y, D_v, D_c, lam, hp.ridge_tau)
        if on_block:
            on_block("Z_s", (P_s, Z_s, D_v, D_c))
        P_s = update_P_sylvester(X, C, D_v, Z_s, beta, a_eig=a_eig)
        if on_block:
            on_block("P_s", (P_s, Z_s, D_v, D_c))
        D_v, res_v = update_D(D_v, Z_s, Z_u, P_s, P_u, gamma)
        if on_block:
            on_block("D_v", (P_s, Z_s, D_v, D_c))
        # the lam factor scales both semantic residuals equally, so the
        # descent direction is unchanged and lam = 0 stays monotone
        D_c, res_c = update_D(D_c, Z_s, Z_u, Y, Y_u, gamma)
        if on_block:
            on_block("D_c", (P_s, Z_s, D_v, D_c))
        stalled = stalled or res_v.stalled or res_c.stalled
        sweeps += 1
        trace.append(objective(P_s, Z_s, D_v, D_c))
        if _relative_drop(trace[-2], trace[-1]) < INNER_TOL:
            break
    return P_s, Z_s, D_v, D_c, SolveReport(inner_iterations=sweeps, objective_trace=trace, stalled=stalled)


def init_state(seen, unseen, hp):
    """Deterministic initial ModelState for a fit under hp.seed."""
    check_pair(seen, unseen)
    P_s, D_v, D_c = _init_dictionaries(seen, unseen.semantics, hp)
    Z_s = update_Z(P_s, seen.semantics, D_v, D_c, hp.lam, hp.ridge_tau)
    P_u, C_u, Z_u = predict_inductive(D_v, D_c, unseen.semantics, unseen.features, hp.lam, hp.ridge_tau)
    if hp.mode == "gzsl":
        C_u = update_Cu_gzsl(unseen.features, P_s, P_u)
    return ModelState(P_s=P_s, P_u=P_u, D_v=D_v, D_c=D_c, Z_s=Z_s, Z_u=Z_u, C_u=C_u)


def fit(seen, unseen, hp=None, on_block=None):
    """Run the full alternation and return (ModelState, FitHistory).

    Each outer iteration solves the pool stage, then the labeled stage, and
    measures Err1 = ||D_v - D_v_prev||_F and Err2 = ||D_c - D_c_prev||_F.
    The loop stops once both fall below hp.epsilon (converged), after
    hp.max_outer iterations, or after five consecutive iterations without
    any Err improvement (not converged).  A final pool solve against the
    settled dictionaries produces the reported assignment.

    ``on_block`` (stage, block, ModelState) is invoked after every block
    update with the provisional state; the objective evaluated there is
    non-increasing over the whole run.
    """
    hp = hp or HyperParams()
    check_pair(seen, unseen)
    state = init_state(seen, unseen, hp)
    inductive = hp.mode == "inductive"
    gzsl = hp.mode == "gzsl"
    a_eig_seen = symmetric_eig(seen.features @ seen.features.T)
    a_eig_pool = None if inductive else symmetric_eig(unseen.features @ unseen.features.T)
    history = FitHistory()

    def stage_hook(stage, fields):
        if on_block is None:
            return None

        def hook(block, values):
            on_block(stage, block, replace(state, **dict(zip(fields, values))))
        return hook

    def pool_stage():
        if inductive:
            P_u, C_u, Z_u = predict_inductive(state.D_v, state.D_c, unseen.semantics,
                                              unseen.features, hp.lam, hp.ridge_tau)
            if on_block:
                on_block("unseen", "inductive", replace(state, P_u=P_u, C_u=C_u, Z_u=Z_u))
        else:
            P_u, C_u, Z_u, _ = solve_unseen(
                state.D_v, state.D_c, unseen, hp,
                warm=(state.P_u, state.C_u, state.Z_u),
                P_s=state.P_s if gzsl else None,
                a_eig=a_eig_pool,
                on_block=stage_hook("unseen", ("P_u", "C_u", "Z_u")),
            )
        state.P_u, state.C_u, state.Z_u = P_u, C_u, Z_u

    prev_err = np.inf
    no_decrease = 0
    for _ in range(hp.max_outer):
        pool_stage()
        D_v_prev, D_c_prev = state.D_v, state.D_c
        P_s, Z_s, D_v, D_c, _ = solve_seen(
            seen, state.P_u, state.Z_u, unseen.semantics, hp,
            warm=(state.P_s, state.Z_s, state.D_v, state.D_c),
            a_eig=a_eig_seen,
            on_block=stage_hook("seen", ("P_s", "Z_s", "D_v", "D_c")),
        )
        state.P_s, state.Z_s, state.D_v, state.D_c = P_s, Z_s, D_v, D_c
        err1 = float(np.linalg.norm(D_v - D_v_prev))
        err2 = float(np.linalg.norm(D_c - D_c_prev))
        history.objective_per_outer.append(total_objective(state, seen, unseen, hp))
        history.err1_per_outer.append(err1)
        history.err2_per_outer.append(err2)
        history.outer_iterations += 1
        if err1 < hp.epsilon and err2 < hp.epsilon:
            history.converged = True
            break
        cur = max(err1, err2)
        if cur < prev_err:
            no_decrease = 0
        else:
            no_decrease += 1
            if no_decrease >= OUTER_STALL_LIMIT:
                break
        prev_err = cur
    pool_stage()
    return state, history


def predicted_labels(state):
    """1-based class labels from the fitted pool assignment."""
    return labels_from_onehot(state.C_u)
