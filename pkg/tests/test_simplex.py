import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog as scipy_linprog

from inclusion_lab._simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog


def test_simple_max():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    res = linprog(np.array([-1.0, -1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]), np.array([4.0, 6.0]))
    assert res.status == OPTIMAL
    assert res.fun == pytest.approx(-2.8)
    np.testing.assert_allclose(res.x, [1.6, 1.2], atol=1e-12)


def test_infeasible():
    res = linprog(np.zeros(1), np.array([[1.0]]), np.array([-1.0]))
    assert res.status == INFEASIBLE
    assert not res.success


def test_unbounded():
    res = linprog(np.array([-1.0]), np.array([[-1.0]]), np.array([0.0]))
    assert res.status == UNBOUNDED


def test_equality_with_redundant_rows():
    A_eq = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    res = linprog(np.array([1.0, 2.0, 3.0]), None, None, A_eq, np.array([1.0, 2.0]))
    assert res.status == OPTIMAL
    assert res.fun == pytest.approx(1.0)


def test_degenerate_cycling_example():
    # Beale's classic cycling instance; Bland's rule must terminate
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    res = linprog(c, A, b)
    assert res.status == OPTIMAL
    assert res.fun == pytest.approx(-0.05)


@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(1, 6))
def test_matches_scipy_on_random_feasible_lps(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = rng.random(n)
    b = A @ x0 + rng.random(m)  # x0 is feasible
    A = np.vstack([A, np.ones((1, n))])  # keep it bounded
    b = np.append(b, x0.sum() + 1.0)
    c = rng.normal(size=n)
    ours = linprog(c, A, b)
    ref = scipy_linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    assert ours.success and ref.success
    assert ours.fun == pytest.approx(ref.fun, abs=1e-8)
    assert np.all(A @ ours.x <= b + 1e-8)
    assert np.all(ours.x >= -1e-12)
