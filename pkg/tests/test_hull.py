import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog as scipy_linprog
from scipy.spatial import ConvexHull

from inclusion_lab.hull import (
    ConvexWeights,
    DomainError,
    NotInHullError,
    Polytope,
    caratheodory_reduce,
    contains,
    distance,
    excess,
    hausdorff,
    hull_subset,
    min_of_convex_max,
    reduce_weights,
    support,
    union_hull,
)

seeds = st.integers(0, 2**31 - 1)


def P(*pts):
    return Polytope(np.array(pts, dtype=float))


def brute_min_max(Pp, Qq, n=10_001):
    """Grid over convex weights of two generators (exact enough for a 1-parameter family)."""
    lam = np.linspace(0.0, 1.0, n)
    p = np.outer(lam, Pp.vertices[0]) + np.outer(1 - lam, Pp.vertices[1])
    return float((p @ Qq.vertices.T).max(axis=1).min())


# -- Polytope ---------------------------------------------------------------

def test_polytope_validation():
    with pytest.raises(DomainError):
        Polytope(np.zeros((0, 2)))
    with pytest.raises(DomainError):
        P([0.0, np.nan])
    with pytest.raises(DomainError):
        P([0.0, np.inf])
    assert P([1.0, 2.0]).dim == 2
    assert len(P([0.0], [1.0], [0.0]).unique()) == 2


def test_vertices_are_read_only():
    p = P([0.0], [1.0])
    with pytest.raises(ValueError):
        p.vertices[0, 0] = 5.0


# -- support ----------------------------------------------------------------

def test_support_examples():
    assert support(P([0.0], [1.0]), [1.0]) == (1.0, 1)
    assert support(P([1.0, 0.0], [0.0, 1.0]), [1.0, 1.0]) == (1.0, 0)
    assert support(P([-1.0, -1.0]), [1.0, 0.0]) == (-1.0, 0)


def test_support_rejects_bad_direction():
    with pytest.raises(DomainError):
        support(P([0.0, 0.0]), [np.nan, 1.0])
    with pytest.raises(DomainError):
        support(P([0.0, 0.0]), [1.0])


@given(seeds, st.integers(1, 5), st.integers(1, 8))
def test_support_invariant_under_redundant_points(seed, dim, m):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(m, dim))
    W = rng.dirichlet(np.ones(m), size=5)
    Q = Polytope(np.vstack([V, W @ V]))
    for _ in range(5):
        c = rng.normal(size=dim)
        assert abs(support(Polytope(V), c)[0] - support(Q, c)[0]) <= 1e-12 * max(1.0, np.abs(V).max())


# -- contains ---------------------------------------------------------------

def test_contains_examples():
    assert contains(P([0.0], [1.0]), [0.5], 1e-9)
    assert not contains(P([0.0], [1.0]), [1.1], 1e-9)
    tri = P([1.0, 0.0], [0.0, 1.0], [-1.0, -1.0])
    assert contains(tri, [0.0, 0.0], 1e-9)


def test_contains_triangle_origin_brute_force():
    # oracle: a grid of convex weights reaches the origin
    w = np.linspace(0, 1, 301)
    a, b = np.meshgrid(w, w)
    ok = a + b <= 1
    pts = a[ok, None] * [1.0, 0.0] + b[ok, None] * [0.0, 1.0] + (1 - a[ok] - b[ok])[:, None] * [-1.0, -1.0]
    assert np.min(np.linalg.norm(pts, axis=1)) < 1e-2
    assert contains(P([1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]), [0.0, 0.0])


def test_contains_errors():
    with pytest.raises(DomainError):
        contains(P([0.0, 0.0]), [0.0])
    with pytest.raises(DomainError):
        contains(P([0.0]), [0.0], tol=-1.0)


def test_distance_to_segment():
    seg = P([0.0, 0.0], [2.0, 0.0])
    assert distance(seg, [1.0, 1.0]) == pytest.approx(1.0)
    assert distance(seg, [3.0, 0.0]) == pytest.approx(1.0)
    assert distance(seg, [0.0, 0.0]) == 0.0


@given(seeds, st.integers(1, 5), st.integers(1, 10))
def test_contains_implies_support_inequalities(seed, dim, m):
    rng = np.random.default_rng(seed)
    Pol = Polytope(rng.normal(size=(m, dim)))
    q = rng.normal(size=dim) * 0.7
    if contains(Pol, q, 1e-9):
        for c in rng.normal(size=(50, dim)):
            assert c @ q <= support(Pol, c)[0] + 1e-9 * np.linalg.norm(c) + 1e-12


@given(seeds, st.integers(3, 12))
def test_contains_matches_halfplane_oracle_2d(seed, m):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(m, 2))
    try:
        hull = ConvexHull(V)
    except Exception:
        return  # degenerate draw
    Pol = Polytope(V)
    for q in rng.normal(size=(20, 2)) * 1.5:
        slack = hull.equations[:, :2] @ q + hull.equations[:, 2]
        if np.all(slack <= -1e-7):
            assert contains(Pol, q, 1e-9)
        elif np.any(slack >= 1e-7):
            assert not contains(Pol, q, 1e-9)


# -- Caratheodory -----------------------------------------------------------

def test_caratheodory_examples():
    line = P([0.0], [1.0], [2.0])
    cw = caratheodory_reduce(line, [1.0])
    assert len(cw.indices) <= 2
    assert cw.point(line)[0] == pytest.approx(1.0, abs=1e-9)

    square = P([1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0])
    cw = caratheodory_reduce(square, [0.0, 0.0])
    assert len(cw.indices) <= 3
    # oracle: direct affine solve on the chosen support
    S = square.vertices[list(cw.indices)]
    M = np.vstack([S.T, np.ones(len(S))])
    w = np.linalg.lstsq(M, np.array([0.0, 0.0, 1.0]), rcond=None)[0]
    np.testing.assert_allclose(w, cw.weights, atol=1e-9)

    single = P([3.0, 4.0])
    cw = caratheodory_reduce(single, [3.0, 4.0])
    assert cw.indices == (0,) and cw.weights == (1.0,)


def test_caratheodory_not_in_hull():
    with pytest.raises(NotInHullError, match="not in hull"):
        caratheodory_reduce(P([0.0], [1.0]), [2.0])


def test_convex_weights_validation():
    with pytest.raises(DomainError):
        ConvexWeights((0, 1), (0.5, 0.6))
    with pytest.raises(DomainError):
        ConvexWeights((0,), (1.0, 0.0))


@given(seeds, st.integers(1, 5), st.integers(1, 30))
def test_reduce_weights_property(seed, dim, m):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(m, dim))
    w = rng.dirichlet(np.ones(m))
    q = w @ V
    cw = reduce_weights(V, w)
    assert len(cw.indices) <= dim + 1
    assert min(cw.weights) >= 0.0
    assert abs(sum(cw.weights) - 1.0) <= 1e-12
    assert np.linalg.norm(cw.point(Polytope(V)) - q) <= 1e-9


# -- unions and subsets -----------------------------------------------------

def test_union_hull_examples():
    U = union_hull([P([0.0]), P([1.0])])
    assert hausdorff(U, P([0.0], [1.0])) == 0.0
    A = P([1.0, 2.0], [3.0, 4.0])
    assert union_hull([A]) is A
    tri = union_hull([P([1.0, 0.0]), P([0.0, 1.0]), P([-1.0, -1.0])])
    assert contains(tri, [0.0, 0.0])


def test_union_hull_errors():
    with pytest.raises(DomainError):
        union_hull([])
    with pytest.raises(DomainError):
        union_hull([P([0.0]), P([0.0, 1.0])])


def test_hull_subset_examples():
    assert hull_subset(P([0.2], [0.8]), P([0.0], [1.0]), 1e-9)
    assert not hull_subset(P([0.0], [1.0]), P([0.0]), 1e-9)
    A = P([0.0, 1.0], [2.0, 3.0], [1.0, -1.0])
    assert hull_subset(A, A, 1e-9)
    with pytest.raises(DomainError):
        hull_subset(P([0.0]), P([0.0, 0.0]))


@given(seeds, st.integers(1, 4))
def test_subset_of_union(seed, dim):
    rng = np.random.default_rng(seed)
    A = Polytope(rng.normal(size=(rng.integers(1, 6), dim)))
    B = Polytope(rng.normal(size=(rng.integers(1, 6), dim)))
    assert hull_subset(A, union_hull([A, B]))


def test_excess_is_one_sided():
    A, B = P([0.0], [1.0]), P([0.0])
    assert excess(A, B) == pytest.approx(1.0)
    assert excess(B, A) == 0.0
    assert hausdorff(A, B) == pytest.approx(1.0)


# -- min-max ----------------------------------------------------------------

def test_min_max_examples():
    e = P([1.0, 0.0], [0.0, 1.0])
    assert min_of_convex_max(e, P([0.5, 0.5])) == pytest.approx(0.5, abs=1e-12)
    assert min_of_convex_max(P([2.0, 3.0]), P([-1.0, 4.0])) == pytest.approx(10.0)
    neg = P([-1.0, 0.0], [0.0, -1.0])
    value = min_of_convex_max(e, neg)
    assert value == pytest.approx(brute_min_max(e, neg), abs=1e-6)
    assert value == pytest.approx(-0.5, abs=1e-12)


def _scipy_min_max(Pv, Qv):
    m = len(Pv)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A = np.hstack([Qv @ Pv.T, -np.ones((len(Qv), 1))])
    A_eq = np.append(np.ones(m), 0.0)[None, :]
    res = scipy_linprog(c, A_ub=A, b_ub=np.zeros(len(Qv)), A_eq=A_eq, b_eq=[1.0],
                        bounds=[(0, None)] * m + [(None, None)], method="highs")
    return res.fun


@given(seeds, st.integers(1, 5), st.integers(1, 7), st.integers(1, 7))
def test_min_max_matches_scipy_and_bounds(seed, dim, m, k):
    rng = np.random.default_rng(seed)
    Pp = Polytope(rng.normal(size=(m, dim)))
    Qq = Polytope(rng.normal(size=(k, dim)))
    value = min_of_convex_max(Pp, Qq)
    assert value <= float((Pp.vertices @ Qq.vertices.T).max()) + 1e-12
    assert value == pytest.approx(_scipy_min_max(Pp.vertices, Qq.vertices), abs=1e-8)


def test_min_max_dim_mismatch():
    with pytest.raises(DomainError):
        min_of_convex_max(P([0.0]), P([0.0, 1.0]))
