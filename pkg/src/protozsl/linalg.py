"""Dense linear-algebra kernels used by the block-coordinate solvers.

Everything here is plain numpy/scipy on float64 arrays.  The two solvers
check their own residuals after the fact, so a caller that gets a result
back can rely on it without re-verifying.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import SingularSystemError, ValidationError

# relative symmetry defect tolerated before an input is rejected
SYMMETRY_RTOL = 1e-10
# eigenvalue-sum floor below which the Sylvester operator counts as singular
EIGENSUM_FLOOR = 1e-12
# accepted relative residuals, checked by direct multiplication
SYLVESTER_RTOL = 1e-8
GRAM_RTOL = 1e-10

MAX_BACKTRACKS = 20


def as_matrix(a, name="matrix"):
    """Coerce ``a`` to a 2-d float64 array, rejecting non-finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError("%s must be 2-dimensional, got shape %s" % (name, (m.shape,)))
    if not np.all(np.isfinite(m)):
        r, c = np.argwhere(~np.isfinite(m))[0]
        raise ValidationError("%s has a non-finite entry at row %d, column %d" % (name, r, c))
    return m


def _require_symmetric(a, name):
    defect = np.linalg.norm(a - a.T)
    if defect > SYMMETRY_RTOL * max(1.0, np.linalg.norm(a)):
        raise ValidationError("%s must be symmetric (defect %.3e)" % (name, defect))


def symmetric_eig(a):
    """Eigendecomposition of a symmetric matrix, as a (values, vectors) pair.

    Exposed so callers can precompute and reuse the factorization of a
    matrix that stays fixed across many solve_sylvester_spd calls.
    """
    return np.linalg.eigh(as_matrix(a, "matrix"))


def solve_sylvester_spd(A, B, R, a_eig=None, b_eig=None):
    """Solve A @ P + P @ B = R for symmetric A (PSD) and B (PD).

    Diagonalizing A = U diag(lam) U^T and B = V diag(sig) V^T turns the
    equation into elementwise division: P = U ((U^T R V) / (lam_i + sig_j)) V^T.
    Any eigenvalue sum at or below 1e-12 is treated as singular.  The result
    is verified against the residual bound ||A P + P B - R||_F <=
    1e-8 * max(1, ||R||_F) before being returned.

    ``a_eig`` / ``b_eig`` accept precomputed (values, vectors) pairs from
    symmetric_eig for operands that repeat across calls.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    R = as_matrix(R, "R")
    if A.shape[0] != A.shape[1] or B.shape[0] != B.shape[1]:
        raise ValidationError("A and B must be square, got %s and %s" % (A.shape, B.shape))
    if R.shape != (A.shape[0], B.shape[0]):
        raise ValidationError("R must be %d x %d, got %s" % (A.shape[0], B.shape[0], (R.shape,)))
    _require_symmetric(A, "A")
    _require_symmetric(B, "B")
    lam, U = np.linalg.eigh(A) if a_eig is None else a_eig
    sig, V = np.linalg.eigh(B) if b_eig is None else b_eig
    denom = lam[:, None] + sig[None, :]
    if denom.min() <= EIGENSUM_FLOOR:
        i, j = np.unravel_index(np.argmin(denom), denom.shape)
        raise SingularSystemError(
            "eigenvalue pair (A eigenvalue %d = %.3e, B eigenvalue %d = %.3e) "
            "sums to %.3e, at or below %.0e" % (i, lam[i], j, sig[j], denom[i, j], EIGENSUM_FLOOR)
        )
    P = U @ ((U.T @ R @ V) / denom) @ V.T
    resid = np.linalg.norm(A @ P + P @ B - R)
    if resid > SYLVESTER_RTOL * max(1.0, np.linalg.norm(R)):
        raise SingularSystemError(
            "Sylvester solve residual %.3e exceeds tolerance; system is ill-conditioned" % resid
        )
    return P


def gram_ridge_solve(G, R, tau):
    """Solve (G + tau I) Z = R for symmetric PSD G via Cholesky.

    The result is verified against ||(G + tau I) Z - R||_F <=
    1e-10 * max(1, ||R||_F).  Factorization failure or a residual violation
    raises SingularSystemError suggesting a larger tau.
    """
    G = as_matrix(G, "G")
    R = as_matrix(R, "R")
    if G.shape[0] != G.shape[1]:
        raise ValidationError("G must be square, got %s" % (G.shape,))
    if R.shape[0] != G.shape[0]:
        raise ValidationError("R must have %d rows, got %d" % (G.shape[0], R.shape[0]))
    if not np.isscalar(tau) and not isinstance(tau, (int, float, np.floating)):
        raise ValidationError("tau must be a scalar")
    tau = float(tau)
    if tau < 0.0:
        raise ValidationError("tau must be nonnegative, got %g" % tau)
    _require_symmetric(G, "G")
    H = G + tau * np.eye(G.shape[0])
    try:
        factor = cho_factor(H, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "Gram system is numerically singular (%s); increase tau" % exc
        ) from None
    Z = cho_solve(factor, R)
    resid = np.linalg.norm(H @ Z - R)
    if resid > GRAM_RTOL * max(1.0, np.linalg.norm(R)):
        raise SingularSystemError(
            "Gram solve residual %.3e exceeds tolerance; increase tau" % resid
        )
    return Z


def project_columns_unit_ball(M):
    """Rescale any column with Euclidean norm above one back onto the unit sphere."""
    M = as_matrix(M, "matrix")
    norms = np.linalg.norm(M, axis=0)
    scale = np.where(norms > 1.0, norms, 1.0)
    return M / scale


def normalize_columns(M, name="matrix"):
    """Scale every column to unit Euclidean norm."""
    M = as_matrix(M, name)
    norms = np.linalg.norm(M, axis=0)
    small = np.flatnonzero(norms < 1e-12)
    if small.size:
        raise ValidationError(
            "%s column %d has norm %.3e, below 1e-12; cannot normalize" % (name, small[0], norms[small[0]])
        )
    return M / norms


@dataclass(frozen=True)
class LineSearch:
    """Armijo backtracking configuration for projected_descent.

    The defaults run the descent close to its fixed point; dictionary
    iterates left short of stationarity keep the outer alternation's
    change-based stopping rule from ever triggering.
    """

    step0: float = 1.0
    shrink: float = 0.5
    c1: float = 1e-4
    max_steps: int = 80
    tol: float = 1e-9


@dataclass
class DescentResult:
    x: np.ndarray
    objective_trace: list
    stalled: bool


def projected_descent(objective, gradient, x0, project, step0=1.0, shrink=0.5,
                      c1=1e-4, max_steps=50, tol=1e-6):
    """Projected gradient descent with Armijo backtracking.

    Each iteration tries x' = project(x - step * g), halving the step until
    the sufficient-decrease test f(x') <= f(x) - c1 * step * ||g||_F^2 holds.
    Stops on a zero gradient, when the relative objective decrease falls
    below ``tol``, or after ``max_steps`` accepted steps.  If no step within
    the 20-shrink backtracking budget achieves decrease the current iterate
    is returned with ``stalled`` set, unless the trial point has stopped
    moving, which just means a constrained stationary point was reached.

    The returned objective_trace is non-increasing and starts at f(x0), so
    f(result.x) <= f(x0) always holds.
    """
    if not 0.0 < shrink < 1.0:
        raise ValidationError("shrink must lie in (0, 1), got %g" % shrink)
    if not 0.0 < c1 < 1.0:
        raise ValidationError("c1 must lie in (0, 1), got %g" % c1)
    if step0 <= 0.0:
        raise ValidationError("step0 must be positive, got %g" % step0)
    x = as_matrix(x0, "x0")
    f = float(objective(x))
    trace = [f]
    stalled = False
    for _ in range(max_steps):
        g = np.asarray(gradient(x), dtype=np.float64)
        gsq = float(np.sum(g * g))
        if gsq == 0.0:
            break
        step = step0
        cand = None
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            cand = project(x - step * g)
            f_cand = float(objective(cand))
            if f_cand <= f - c1 * step * gsq:
                accepted = True
                break
            step *= shrink
        if not accepted:
            # no decrease found: if the smallest trial no longer moves the
            # iterate we are pinned at a constrained stationary point
            moved = np.linalg.norm(cand - x) > 1e-14 * max(1.0, np.linalg.norm(x))
            stalled = moved
            break
        drop = f - f_cand
        x, f = cand, f_cand
        trace.append(f)
        if drop < tol * max(1.0, abs(trace[-2])):
            break
    return DescentResult(x=x, objective_trace=trace, stalled=stalled)
