import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inclusion_lab.hull import DomainError, Polytope, union_hull
from inclusion_lab.lyap import (
    LOWER,
    REDUCED,
    UPPER,
    certify,
    derivative,
    gen_deriv_lower,
    gen_deriv_reduced,
    gen_deriv_upper,
    parse_grid,
    rectangular_grid,
    reduce_inclusion,
    sample_derivatives,
)
from inclusion_lab.nonsmooth import LyapunovCandidate, linf_norm_candidate, quadratic_candidate
from inclusion_lab.scenarios import scenario

seeds = st.integers(0, 2**31 - 1)


def P(*pts):
    return Polytope(np.array(pts, dtype=float))


def random_max_candidate(rng, n, m):
    """max of m affine-in-(x,t) functions, with a shared tie at the origin."""
    A = rng.normal(size=(m, n + 1))
    values = [lambda x, t, a=a: float(a[:-1] @ x + a[-1] * t) for a in A]
    grads = [lambda x, t, a=a: a.copy() for a in A]
    return LyapunovCandidate.max_of(n, values, grads, decay=lambda x: 0.1 * float(x @ x))


# -- upper / lower ----------------------------------------------------------

def test_upper_examples():
    V = linf_norm_candidate(2)
    x = np.array([1.0, 1.0])
    up = gen_deriv_upper(V, P([-1.0, -1.0]), x)
    assert up.value == -1.0
    assert gen_deriv_upper(V, P([0.0, 0.0]), x).value == 0.0


def test_upper_sec8_example1_point():
    sc = scenario("sec8_example1")
    z = np.array([1.0, 0.0])
    F = sc.set_maps[1](z, 0.0)
    up = gen_deriv_upper(sc.V, F, z, 0.0)
    # oracle: exhaustive pair scan over the lifted vertices
    G = np.append(z, 0.0)
    scan = max(float(G @ np.append(q, 1.0)) for q in F.vertices)
    assert up.value == pytest.approx(scan, abs=1e-12)
    assert up.value <= -1.0 + 1e-12


def test_upper_witnesses_reproduce_value():
    V = linf_norm_candidate(2)
    x = np.array([1.0, 1.0])
    F = P([1.0, 0.0], [-1.0, -1.0], [0.0, 1.0])
    up = gen_deriv_upper(V, F, x)
    assert abs(up.witness_p @ np.append(up.witness_q, 1.0) - up.value) <= 1e-12


def test_lower_examples_sec7():
    sc = scenario("sec7_counterexample")
    x = np.array([1.0, 1.0])
    F1 = sc.set_maps[1](x, 0.0)
    assert gen_deriv_lower(sc.V, F1, x) <= 1e-12
    U = union_hull([m(x, 0.0) for m in sc.set_maps.values()])
    assert gen_deriv_lower(sc.V, U, x) == pytest.approx(0.5 * sc.V(x), abs=1e-12)


def test_lower_equals_upper_for_smooth_V():
    V = quadratic_candidate(2)
    x = np.array([0.3, -0.2])
    F = P([1.0, 2.0], [-1.0, 0.5], [0.0, -3.0])
    assert gen_deriv_lower(V, F, x) == pytest.approx(gen_deriv_upper(V, F, x).value, abs=1e-12)


def test_lower_warns_for_nonregular():
    V = quadratic_candidate(1, regular=False)
    with pytest.warns(UserWarning):
        gen_deriv_lower(V, P([1.0]), np.ones(1))


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        gen_deriv_upper(linf_norm_candidate(2), P([1.0, 2.0, 3.0]), np.ones(2))


@given(seeds, st.integers(1, 3), st.integers(1, 4), st.integers(1, 6))
@settings(max_examples=60)
def test_lower_le_upper_and_monotone(seed, n, m, k):
    rng = np.random.default_rng(seed)
    V = random_max_candidate(rng, n, m)
    x = np.zeros(n)  # all pieces tie here
    F = Polytope(rng.normal(size=(k, n)))
    s = sample_derivatives(V, F, x, 0.0)
    assert s.lower <= s.upper + 1e-12
    bigger = Polytope(np.vstack([F.vertices, rng.normal(size=(2, n))]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert gen_deriv_upper(V, bigger, x).value >= s.upper - 1e-12
        assert gen_deriv_lower(V, bigger, x) >= s.lower - 1e-9


@given(seeds, st.integers(1, 3))
@settings(max_examples=40)
def test_smooth_singleton_matches_finite_difference(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    V = LyapunovCandidate.smooth(
        n,
        lambda x, t: float(np.sum(np.sin(x + a)) * np.exp(-0.3 * t)),
        lambda x, t: np.append(np.cos(x + a) * np.exp(-0.3 * t), -0.3 * np.sum(np.sin(x + a)) * np.exp(-0.3 * t)),
    )
    x, t, f = rng.normal(size=n), float(rng.uniform(0, 2)), rng.normal(size=n)
    h = 1e-6
    fd = (V(x + h * f, t + h) - V(x - h * f, t - h)) / (2 * h)
    up = gen_deriv_upper(V, Polytope(f[None, :]), x, t).value
    lo = gen_deriv_lower(V, Polytope(f[None, :]), x, t)
    assert up == pytest.approx(lo, abs=1e-12)
    assert up == pytest.approx(fd, rel=1e-5, abs=1e-9)


@given(seeds, st.integers(1, 3), st.integers(2, 4))
@settings(max_examples=60)
def test_union_upper_is_max_of_upper(seed, n, nsys):
    rng = np.random.default_rng(seed)
    V = random_max_candidate(rng, n, 3)
    x = np.zeros(n)
    Fs = [Polytope(rng.normal(size=(rng.integers(1, 5), n))) for _ in range(nsys)]
    u = gen_deriv_upper(V, union_hull(Fs), x).value
    assert abs(u - max(gen_deriv_upper(V, F, x).value for F in Fs)) <= 1e-9


# -- reduction --------------------------------------------------------------

def test_reduce_off_surface_unchanged():
    sc = scenario("sec7_counterexample")
    x = np.array([2.0, 1.0])
    F = sc.set_maps[1](x, 0.0)
    red = reduce_inclusion([sc.V], F, x)
    assert red.rows.shape[0] == 0 and not red.is_empty()
    assert float(gen_deriv_reduced(sc.V, [sc.V], F, x)) == pytest.approx(gen_deriv_lower(sc.V, F, x), abs=1e-12)


def test_reduce_on_surface_sec7():
    sc = scenario("sec7_counterexample")
    x = np.array([1.0, 1.0])
    F = sc.set_maps[1](x, 0.0)
    red = reduce_inclusion([sc.V], F, x)
    pts = red.points()
    assert pts is not None and pts.vertices.tolist() == [[-1.0, -1.0]]
    # the set is exactly {g3}: max and min of each coordinate coincide
    for c in np.eye(2):
        assert red.max_linear(c) == pytest.approx(-1.0, abs=1e-12)
        assert -red.max_linear(-c) == pytest.approx(-1.0, abs=1e-12)
    r = gen_deriv_reduced(sc.V, [sc.V], F, x)
    assert not r.empty and float(r) == pytest.approx(-1.0, abs=1e-12)


def test_reduce_singleton_satisfying_equalities():
    V = linf_norm_candidate(2)
    x = np.array([1.0, 1.0])
    F = P([-1.0, -1.0])
    red = reduce_inclusion([V], F, x)
    assert not red.is_empty() and red.points().vertices.tolist() == [[-1.0, -1.0]]


def test_reduced_empty_sentinel():
    V = linf_norm_candidate(2)
    x = np.array([1.0, 1.0])
    F = P([1.0, 0.0], [2.0, 0.5])  # (v1 - v2).q > 0 on all of F
    r = gen_deriv_reduced(V, [V], F, x)
    assert r.empty and r.value is None
    assert float(r) == float("-inf") and r.at_most(-1e300)


@given(seeds, st.integers(1, 3), st.integers(1, 6))
@settings(max_examples=60)
def test_reduced_le_lower(seed, n, k):
    rng = np.random.default_rng(seed)
    V = random_max_candidate(rng, n, 2)
    x = np.zeros(n)
    F = Polytope(rng.normal(size=(k, n)))
    r = gen_deriv_reduced(V, [V], F, x)
    if not r.empty:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert float(r) <= gen_deriv_lower(V, F, x) + 1e-9


# -- certification ----------------------------------------------------------

def test_certify_sec7_lower():
    sc = scenario("sec7_counterexample")
    pts = rectangular_grid(parse_grid("-2:2:21,-2:2:21"))
    rep = certify(sc.V, sc.set_maps, pts, mode=LOWER)
    assert rep.subsystems_pass and rep.passes == {1: 441, 2: 441}
    surface = [x for x, _ in pts if abs(x[0]) == abs(x[1]) and np.any(x != 0)]
    assert len(rep.union_failures) == len(surface) == 40
    for _, x, _, v in rep.union_failures:
        assert v == pytest.approx(0.5 * sc.V(np.array(x)), abs=1e-9)
    assert not rep.passed and "not a proof" in rep.note


def test_certify_sec8_example1_upper():
    sc = scenario("sec8_example1")
    pts = rectangular_grid(parse_grid("-2:2:9,-2:2:9"), (0.0, 1.3))
    rep = certify(sc.V, sc.set_maps, pts, mode=UPPER)
    assert rep.passed and rep.worst_margin >= -1e-9


def test_certify_union_upper_matches_worst_subsystem():
    sc = scenario("sec7_counterexample")
    pts = rectangular_grid(parse_grid("-2:2:5,-2:2:5"))
    rep = certify(sc.V, sc.set_maps, pts, mode=UPPER, workers=1)
    for k, (x, t) in enumerate(pts):
        sets = [m(x, t) for m in sc.set_maps.values()]
        u = gen_deriv_upper(sc.V, union_hull(sets), x, t).value
        assert abs(u - max(gen_deriv_upper(sc.V, F, x, t).value for F in sets)) <= 1e-9


def test_certify_deterministic_across_thread_counts():
    sc = scenario("sec7_counterexample")
    pts = rectangular_grid(parse_grid("-2:2:11,-2:2:11"))
    a = certify(sc.V, sc.set_maps, pts, mode=LOWER, workers=1)
    b = certify(sc.V, sc.set_maps, pts, mode=LOWER, workers=4)
    assert a.union_failures == b.union_failures
    assert (a.worst_margin, a.worst_location, a.passes) == (b.worst_margin, b.worst_location, b.passes)


def test_certify_errors_have_context():
    V = linf_norm_candidate(1)

    def broken(x, t):
        raise ZeroDivisionError

    with pytest.raises(RuntimeError, match="grid point 0"):
        certify(V, {1: broken}, [(np.zeros(1), 0.0)], workers=1)
    with pytest.raises(ValueError):
        certify(V, {}, [(np.zeros(1), 0.0)], mode="sideways")
    with pytest.raises(ValueError):
        derivative("sideways", V, P([0.0]), np.zeros(1), 0.0)


def test_reduced_mode_certifies_sec7_union():
    sc = scenario("sec7_counterexample")
    pts = rectangular_grid(parse_grid("-2:2:5,-2:2:5"))
    rep = certify(sc.V, sc.set_maps, pts, mode=REDUCED, V_family=[sc.V])
    assert rep.subsystems_pass


# -- grids ------------------------------------------------------------------

def test_grid_parsing_and_symmetry():
    axes = parse_grid("-2:2:21, -1:3:5")
    assert axes == [(-2.0, 2.0, 21), (-1.0, 3.0, 5)]
    pts = rectangular_grid(axes[:1])
    xs = sorted(p[0][0] for p in pts)
    assert xs[10] == 0.0 and xs[0] == -2.0 and xs[-1] == 2.0
    assert all(a == -b for a, b in zip(xs, xs[::-1]))
    assert len(rectangular_grid(axes, (0.0, 1.0))) == 2 * 21 * 5
    for bad in ("1:2", "2:1:3", "0:1:1", "a:b:c", "0:inf:3"):
        with pytest.raises(ValueError):
            parse_grid(bad)
