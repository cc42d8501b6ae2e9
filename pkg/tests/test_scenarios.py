import warnings

import numpy as np
import pytest

from inclusion_lab.fields import SwitchingError
from inclusion_lab.nonsmooth import check_bounds, check_gradients
from inclusion_lab.scenarios import SCENARIOS, UnknownScenarioError, resolve_name, scenario


def test_names_and_prefixes():
    assert set(SCENARIOS) == {"sec4_example", "sec7_counterexample", "sec8_example1", "sec8_example2"}
    assert resolve_name("sec7") == "sec7_counterexample"
    with pytest.raises(UnknownScenarioError, match="known scenarios: sec4_example"):
        resolve_name("sec9")
    with pytest.raises(UnknownScenarioError):
        resolve_name("sec8")  # ambiguous


def test_every_scenario_builds_and_evaluates():
    for name in SCENARIOS:
        sc = scenario(name)
        v = sc.field(sc.x0, 0.0)
        assert v.shape == (sc.dim_state,) and np.all(np.isfinite(v))
        assert np.isfinite(sc.V(sc.x0, 0.0))


def test_dyadic_signal():
    sc = scenario("sec4_example")
    rho = sc.rho
    assert rho(np.array([0.75])) == 1
    assert rho(np.array([0.3])) == 2  # 2^-2 <= 0.3 < 2^-1
    assert rho(np.array([2.0 ** -10])) == 10
    assert rho(np.array([-3e-4])) == 12
    with pytest.raises(SwitchingError):
        sc.field.subfield(0)


def test_sec7_fields_by_hand():
    sc = scenario("sec7_counterexample")
    f1, f2 = sc.subfields[1], sc.subfields[2]
    np.testing.assert_array_equal(f1(np.array([0.5, 1.0])), [0.5, 0.0])  # g1 where |x1| < |x2|
    np.testing.assert_array_equal(f1(np.array([2.0, 1.0])), [-2.0, -1.0])  # g3 otherwise
    np.testing.assert_array_equal(f2(np.array([2.0, 1.0])), [0.0, 1.0])  # g2 where |x1| > |x2|
    np.testing.assert_array_equal(f2(np.array([0.5, 1.0])), [-0.5, -1.0])
    printed = scenario("sec7", variant="printed").subfields[2]
    np.testing.assert_array_equal(printed(np.array([0.5, 1.0])), [0.0, 1.0])
    with pytest.raises(ValueError):
        scenario("sec7", variant="other")


def test_sec7_candidate_bounds():
    sc = scenario("sec7_counterexample")
    rng = np.random.default_rng(0)
    grid = [(x, 0.0) for x in rng.uniform(-2, 2, size=(100, 2))]
    assert check_bounds(sc.V, grid)
    assert check_gradients(sc.V, grid) == []


def test_sec8_example1_defaults_and_closed_loop():
    sc = scenario("sec8_example1")
    assert sc.params["theta"] == 2.0 and sc.params["beta"] == 1.0 and sc.params["dbar"] == 0.5
    np.testing.assert_array_equal(sc.x0, [1.0, 2.0])
    z, t = np.array([0.7, -0.3]), 0.4
    # x' = -k x + Y th + d - beta sgn x ; th' = -Y x with Y = x
    expect = [-0.7 + 0.7 * -0.3 + 0.5 * np.sin(t) - 1.0, -0.49]
    np.testing.assert_allclose(sc.field(z, t), expect, atol=1e-15)
    assert sc.V.W(z) == pytest.approx(0.49)


def test_sec8_gain_condition():
    with pytest.raises(ValueError, match="allow_violation"):
        scenario("sec8_example1", beta=0.4)
    with pytest.warns(UserWarning):
        scenario("sec8_example1", beta=0.4, allow_violation=True)
    with pytest.raises(ValueError):
        scenario("sec8_example1", k=-1.0)


def test_sec8_example2_stacked_regressors():
    sc = scenario("sec8_example2")
    assert sc.dim_state == 3 and sc.params["betas"] == [0.8, 1.1]
    z, t = np.array([0.5, 0.2, -0.1]), 0.0  # sin(0) + 0.5 >= 0 -> subsystem 1
    assert sc.rho(z, t) == 1
    np.testing.assert_allclose(sc.field(z, t), [-0.5 + 0.5 * 0.2 + 0.0 - 0.8, -0.25, 0.0], atol=1e-15)
    t = 1.5  # sin(1.5 pi) = -1 -> subsystem 2
    assert sc.rho(z, t) == 2
    Z2 = np.sin(0.5) * 0.5 * (1 + np.cos(t))
    expect = [-1.5 * 0.5 + Z2 * -0.1 + 0.6 * np.cos(4.5) - 1.1, 0.0, -Z2 * 0.5]
    np.testing.assert_allclose(sc.field(z, t), expect, atol=1e-15)
