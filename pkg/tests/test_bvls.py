import numpy as np
import pytest
from scipy.optimize import lsq_linear

from pansharp.bvls import AT_LOWER, AT_UPPER, FREE, BvlsConvergenceError, bvls_solve


def grid_search_k2(A, b, step=1e-3):
    """Exhaustive minimiser over [0, 1]^2 using the Gram form of the residual."""
    g = np.arange(0.0, 1.0 + step / 2, step)
    G = A.T @ A
    c = A.T @ b
    w1, w2 = np.meshgrid(g, g, indexing="ij")
    f = G[0, 0] * w1 * w1 + 2 * G[0, 1] * w1 * w2 + G[1, 1] * w2 * w2 - 2 * (c[0] * w1 + c[1] * w2)
    i, j = np.unravel_index(np.argmin(f), f.shape)
    return np.array([g[i], g[j]])


def test_exact_interpolation_scalar():
    sol = bvls_solve([[2.0], [2.0]], [1.0, 1.0])
    assert sol.weights[0] == pytest.approx(0.5)
    assert sol.residual_norm == pytest.approx(0.0, abs=1e-14)
    assert sol.status == (FREE,)


def test_upper_bound_active_scalar():
    sol = bvls_solve([[1.0]], [5.0])
    assert sol.weights[0] == 1.0
    assert sol.residual_norm == pytest.approx(4.0)
    assert sol.status == (AT_UPPER,)


@pytest.mark.parametrize("seed", range(10))
def test_matches_grid_search_k2(seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(50, 2))
    b = r.normal(size=50) + A @ r.uniform(-0.5, 1.5, 2)
    sol = bvls_solve(A, b)
    np.testing.assert_allclose(sol.weights, grid_search_k2(A, b), atol=2e-3)


@pytest.mark.parametrize("seed", range(10))
def test_interior_solution_matches_normal_equations(seed):
    r = np.random.default_rng(100 + seed)
    A = r.uniform(0, 1, size=(200, 2))
    b = A @ r.uniform(0.2, 0.8, 2) + 0.01 * r.normal(size=200)
    exact = np.linalg.solve(A.T @ A, A.T @ b)
    assert np.all((exact > 0) & (exact < 1))
    np.testing.assert_allclose(bvls_solve(A, b).weights, exact, atol=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_kkt_and_feasibility_random(seed):
    r = np.random.default_rng(200 + seed)
    k = int(r.integers(1, 9))
    A = r.normal(size=(int(r.integers(k, 300)), k))
    b = r.normal(size=A.shape[0]) * 3
    lo = r.uniform(-1, 0, k)
    hi = lo + r.uniform(0.1, 2, k)
    sol = bvls_solve(A, b, lo, hi)
    assert np.all(sol.weights >= lo) and np.all(sol.weights <= hi)
    assert sol.kkt_satisfied(), sol.kkt_report
    for s, w, l, h in zip(sol.status, sol.weights, lo, hi):
        if s == AT_LOWER:
            assert w == l
        elif s == AT_UPPER:
            assert w == h


@pytest.mark.parametrize("seed", range(10))
def test_agrees_with_scipy_bvls(seed):
    r = np.random.default_rng(300 + seed)
    A = r.normal(size=(80, 6))
    b = r.normal(size=80) + A @ r.uniform(-0.5, 1.5, 6)
    ref = lsq_linear(A, b, bounds=(0, 1), method="bvls", tol=1e-14).x
    np.testing.assert_allclose(bvls_solve(A, b).weights, ref, atol=1e-8)


def test_no_feasible_point_beats_solution(rng):
    A = rng.normal(size=(60, 4))
    b = rng.normal(size=60)
    sol = bvls_solve(A, b)
    for w in rng.uniform(0, 1, size=(100, 4)):
        assert sol.residual_norm <= np.linalg.norm(A @ w - b) + 1e-12


def test_scale_equivariance_interior(rng):
    A = rng.uniform(0, 1, size=(100, 3))
    b = A @ np.array([0.3, 0.5, 0.2]) + 0.001 * rng.normal(size=100)
    c = 2.5
    w1 = bvls_solve(A, b).weights
    w2 = bvls_solve(A, c * b, 0.0, c).weights
    assert np.all((w1 > 0) & (w1 < 1))
    np.testing.assert_allclose(w2, c * w1, atol=1e-10)


def test_rank_deficient_is_not_an_error():
    col = np.linspace(1, 2, 20)
    A = np.column_stack([col, col, 2 * col])
    sol = bvls_solve(A, 0.9 * col)
    assert sol.residual_norm == pytest.approx(0.0, abs=1e-10)
    assert sol.kkt_satisfied()


def test_ties_release_lowest_index_first():
    col = np.array([1.0, 2.0, 3.0])
    sol = bvls_solve(np.column_stack([col, col]), 0.5 * col)
    np.testing.assert_allclose(sol.weights, [0.5, 0.0])


def test_independent_of_target_permutation(rng):
    A = rng.normal(size=(40, 3))
    b = rng.normal(size=40)
    perm = rng.permutation(40)
    np.testing.assert_allclose(bvls_solve(A, b).weights, bvls_solve(A[perm], b[perm]).weights, atol=1e-12)


def test_iteration_limit_carries_best_iterate():
    A = np.eye(3)
    b = np.array([0.5, 0.5, 0.5])
    with pytest.raises(BvlsConvergenceError) as info:
        bvls_solve(A, b, max_iters=1)
    best = info.value.best
    assert np.all(best.weights >= 0) and np.all(best.weights <= 1)
    assert best.weights[0] == pytest.approx(0.5)


def test_invalid_bounds():
    with pytest.raises(ValueError):
        bvls_solve([[1.0]], [1.0], 1.0, 0.0)


def test_fixed_variable():
    sol = bvls_solve([[1.0, 1.0], [1.0, -1.0]], [3.0, 1.0], [0.0, 0.5], [5.0, 0.5])
    assert sol.weights[1] == 0.5
    assert sol.kkt_satisfied()
