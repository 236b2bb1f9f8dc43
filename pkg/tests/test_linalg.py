"""Tests for the dense linear-algebra helpers."""

import numpy as np
import numpy.testing as npt
import pytest

from protozsl.exceptions import SingularSystemError, ValidationError
from protozsl.linalg import (LineSearch, as_matrix, gram_ridge_solve,
                             normalize_columns, project_columns_unit_ball,
                             projected_descent, solve_sylvester_spd,
                             symmetric_eig)


def random_spd(rng, n, jitter=1e-3):
    a = rng.standard_normal((n, n))
    return a @ a.T + jitter * np.eye(n)


# ---------------------------------------------------------------------------
# as_matrix / symmetric_eig


def test_as_matrix_accepts_lists_and_promotes_dtype():
    m = as_matrix([[1, 2], [3, 4]])
    assert m.dtype == np.float64
    npt.assert_array_equal(m, [[1.0, 2.0], [3.0, 4.0]])


def test_as_matrix_rejects_wrong_rank():
    with pytest.raises(ValidationError):
        as_matrix(np.zeros(3), "vec")
    with pytest.raises(ValidationError):
        as_matrix(np.zeros((2, 2, 2)), "cube")


def test_as_matrix_rejects_non_finite_and_names_the_entry():
    bad = np.ones((2, 3))
    bad[1, 2] = np.nan
    with pytest.raises(ValidationError, match="row 1, column 2"):
        as_matrix(bad, "features")
    bad[1, 2] = np.inf
    with pytest.raises(ValidationError):
        as_matrix(bad)


def test_symmetric_eig_reconstructs_matrix():
    rng = np.random.default_rng(0)
    for trial in range(20):
        a = random_spd(rng, rng.integers(1, 9))
        values, vectors = symmetric_eig(a)
        npt.assert_allclose(vectors @ np.diag(values) @ vectors.T, a,
                            rtol=0, atol=1e-10)


def test_symmetric_eig_returns_reusable_pair():
    rng = np.random.default_rng(1)
    a = random_spd(rng, 5)
    values, vectors = symmetric_eig(a)
    ref_values, ref_vectors = np.linalg.eigh(a)
    npt.assert_array_equal(values, ref_values)
    npt.assert_array_equal(vectors, ref_vectors)


# ---------------------------------------------------------------------------
# solve_sylvester_spd


def test_sylvester_scalar_hand_case():
    # 2x + 3x = 10  =>  x = 2
    x = solve_sylvester_spd(np.array([[2.0]]), np.array([[3.0]]), np.array([[10.0]]))
    npt.assert_allclose(x, [[2.0]], rtol=0, atol=1e-14)


def test_sylvester_random_spd_residuals():
    rng = np.random.default_rng(7)
    for trial in range(50):
        p = int(rng.integers(1, 12))
        q = int(rng.integers(1, 12))
        a = random_spd(rng, p)
        b = random_spd(rng, q)
        r = rng.standard_normal((p, q))
        x = solve_sylvester_spd(a, b, r)
        resid = np.linalg.norm(a @ x + x @ b - r)
        assert resid <= 1e-8 * max(1.0, np.linalg.norm(r)), \
            "trial %d residual %.3e" % (trial, resid)


def test_sylvester_accepts_precomputed_eig():
    rng = np.random.default_rng(3)
    a = random_spd(rng, 6)
    b = random_spd(rng, 4)
    r = rng.standard_normal((6, 4))
    plain = solve_sylvester_spd(a, b, r)
    cached = solve_sylvester_spd(a, b, r, a_eig=symmetric_eig(a),
                                 b_eig=symmetric_eig(b))
    npt.assert_array_equal(plain, cached)


def test_sylvester_singular_pair_is_reported():
    # lambda = 0 on both sides makes one eigenvalue sum vanish
    a = np.diag([0.0, 1.0])
    b = np.diag([0.0, 2.0])
    r = np.ones((2, 2))
    with pytest.raises(SingularSystemError, match="eigenvalue"):
        solve_sylvester_spd(a, b, r)


def test_sylvester_shape_validation():
    a = np.eye(2)
    b = np.eye(3)
    with pytest.raises(ValidationError):
        solve_sylvester_spd(a, b, np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        solve_sylvester_spd(np.zeros((2, 3)), b, np.zeros((2, 3)))


def test_sylvester_rejects_asymmetric_blocks():
    a = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        solve_sylvester_spd(a, np.eye(2), np.eye(2))


# ---------------------------------------------------------------------------
# gram_ridge_solve


def test_gram_ridge_hand_case():
    # (G + I) x = R with G = diag(1, 0): rows solve as 2/2 and 3/1
    g = np.array([[1.0, 0.0], [0.0, 0.0]])
    r = np.array([[2.0], [3.0]])
    x = gram_ridge_solve(g, r, 1.0)
    npt.assert_allclose(x, [[1.0], [3.0]], rtol=0, atol=1e-14)


def test_gram_ridge_matches_dense_solve():
    rng = np.random.default_rng(11)
    for trial in range(30):
        n = int(rng.integers(1, 10))
        g = random_spd(rng, n)
        r = rng.standard_normal((n, int(rng.integers(1, 6))))
        tau = float(rng.uniform(0.0, 2.0))
        x = gram_ridge_solve(g, r, tau)
        npt.assert_allclose(x, np.linalg.solve(g + tau * np.eye(n), r),
                            rtol=1e-9, atol=1e-9)


def test_gram_ridge_singular_without_ridge():
    g = np.zeros((2, 2))
    r = np.ones((2, 1))
    with pytest.raises(SingularSystemError, match="tau"):
        gram_ridge_solve(g, r, 0.0)


def test_gram_ridge_validates_tau_and_shapes():
    g = np.eye(2)
    r = np.ones((2, 1))
    with pytest.raises(ValidationError):
        gram_ridge_solve(g, r, -0.5)
    with pytest.raises(ValidationError):
        gram_ridge_solve(g, np.ones((3, 1)), 0.1)
    with pytest.raises(ValidationError):
        gram_ridge_solve(np.ones((2, 3)), r, 0.1)


# ---------------------------------------------------------------------------
# column projections


def test_project_columns_unit_ball_only_shrinks_long_columns():
    m = np.array([[3.0, 0.1, 0.0],
                  [4.0, 0.2, 0.0]])
    p = project_columns_unit_ball(m)
    npt.assert_allclose(p[:, 0], [0.6, 0.8], rtol=0, atol=1e-15)
    npt.assert_array_equal(p[:, 1], m[:, 1])  # interior column untouched
    npt.assert_array_equal(p[:, 2], m[:, 2])  # zero column untouched
    norms = np.linalg.norm(p, axis=0)
    assert np.all(norms <= 1.0 + 1e-12)


def test_project_columns_unit_ball_is_idempotent():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((6, 8)) * 3.0
    once = project_columns_unit_ball(m)
    npt.assert_array_equal(project_columns_unit_ball(once), once)


def test_normalize_columns_produces_unit_norms():
    rng = np.random.default_rng(9)
    m = rng.standard_normal((5, 7)) * 10.0
    u = normalize_columns(m)
    npt.assert_allclose(np.linalg.norm(u, axis=0), np.ones(7), rtol=0, atol=1e-12)
    # direction preserved
    cos = np.sum(u * m, axis=0) / np.linalg.norm(m, axis=0)
    npt.assert_allclose(cos, np.ones(7), rtol=0, atol=1e-12)


def test_normalize_columns_rejects_zero_column():
    m = np.ones((3, 3))
    m[:, 1] = 0.0
    with pytest.raises(ValidationError, match="column 1"):
        normalize_columns(m, "semantics")


# ---------------------------------------------------------------------------
# projected_descent


def test_projected_descent_solves_constrained_quadratic():
    # minimize ||x - t||^2 over the unit ball; optimum is t projected
    target = np.array([[3.0], [4.0]])

    def objective(x):
        return float(np.sum((x - target) ** 2))

    def gradient(x):
        return 2.0 * (x - target)

    res = projected_descent(objective, gradient, np.zeros((2, 1)),
                            project_columns_unit_ball, max_steps=200, tol=1e-14)
    npt.assert_allclose(res.x, [[0.6], [0.8]], rtol=0, atol=1e-6)
    assert not res.stalled


def test_projected_descent_trace_is_non_increasing():
    rng = np.random.default_rng(21)
    for trial in range(10):
        target = rng.standard_normal((4, 3))
        objective = lambda x: float(np.sum((x - target) ** 2))
        gradient = lambda x: 2.0 * (x - target)
        x0 = rng.standard_normal((4, 3))
        res = projected_descent(objective, gradient, x0, project_columns_unit_ball)
        trace = np.asarray(res.objective_trace)
        assert trace[0] == objective(x0)
        assert np.all(np.diff(trace) <= 0.0)
        assert objective(res.x) == trace[-1]


def test_projected_descent_stops_at_zero_gradient():
    calls = []

    def objective(x):
        calls.append("f")
        return 0.0

    res = projected_descent(objective, lambda x: np.zeros_like(x),
                            np.ones((2, 2)), lambda x: x)
    npt.assert_array_equal(res.x, np.ones((2, 2)))
    assert res.objective_trace == [0.0]
    assert not res.stalled


def test_projected_descent_flags_stall_on_bad_direction():
    # a deliberately wrong gradient climbs the objective, so no Armijo step
    # is ever accepted while the trial point keeps moving
    objective = lambda x: float(np.sum(x ** 2))
    bad_gradient = lambda x: -2.0 * x
    res = projected_descent(objective, bad_gradient, np.ones((2, 1)), lambda x: x)
    assert res.stalled
    npt.assert_array_equal(res.x, np.ones((2, 1)))


def test_projected_descent_validates_parameters():
    objective = lambda x: float(np.sum(x ** 2))
    gradient = lambda x: 2.0 * x
    x0 = np.ones((1, 1))
    with pytest.raises(ValidationError):
        projected_descent(objective, gradient, x0, lambda x: x, shrink=1.0)
    with pytest.raises(ValidationError):
        projected_descent(objective, gradient, x0, lambda x: x, c1=0.0)
    with pytest.raises(ValidationError):
        projected_descent(objective, gradient, x0, lambda x: x, step0=0.0)


def test_line_search_defaults():
    ls = LineSearch()
    assert ls.step0 == 1.0
    assert ls.shrink == 0.5
    assert ls.c1 == 1e-4
    assert ls.max_steps == 80
    assert ls.tol == 1e-9
