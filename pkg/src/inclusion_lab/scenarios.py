"""Built-in scenarios: wired fields, switching signals, candidates and rules.

Every constant is a keyword parameter with a printed default.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .fields import Piece, PiecewiseField, SmoothField, SwitchedField, SwitchingSignal, analytic_regularization
from .hull import Polytope, union_hull
from .nonsmooth import LyapunovCandidate, linf_norm_candidate, quadratic_candidate
from .sim import ModalField, SelectionRule, SwitchingSurface


class UnknownScenarioError(KeyError):
    pass


@dataclass
class Scenario:
    name: str
    dim_state: int
    field: PiecewiseField
    subfields: Mapping | Callable
    rho: SwitchingSignal
    V: LyapunovCandidate
    rule: SelectionRule
    x0: np.ndarray
    point: np.ndarray
    set_maps: Mapping | None = None
    V_family: list | None = None
    defaults: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    description: str = ""
    x_dims: int | None = None  # leading coordinates forming the regulated state


# --------------------------------------------------------------------------
# countable family that breaks local finiteness of the switching at 0

def _dyadic_index(x: float) -> int:
    """sigma with 2^-sigma <= |x| < 2^(1-sigma), or 1 when there is none."""
    if x == 0.0:
        return 1
    _, e = math.frexp(abs(x))  # |x| in [2^(e-1), 2^e)
    return max(1 - e, 1)


def _dyadic_subfield(sigma: int) -> PiecewiseField:
    if not isinstance(sigma, (int, np.integer)) or sigma < 1:
        raise KeyError(sigma)
    r = 2.0 ** (-int(sigma))
    inner = Piece(lambda x, t: abs(x[0]) < r, SmoothField(1, lambda x, t: np.zeros(1)))
    outer = Piece(lambda x, t: abs(x[0]) >= r, SmoothField(1, lambda x, t: np.ones(1)))
    return PiecewiseField(1, [inner, outer], [lambda x, t: abs(x[0]) == r])


def _is_dyadic_boundary(x, t) -> bool:
    a = abs(float(x[0]))
    return a == 0.0 or (a < 1.0 and math.frexp(a)[0] == 0.5)


def sec4_example(x0: float = -0.5) -> Scenario:
    rho = SwitchingSignal(lambda x, t: _dyadic_index(float(x[0])), None, (_is_dyadic_boundary,))
    f = SwitchedField(_dyadic_subfield, rho, dim_state=1)
    return Scenario(
        name="sec4_example",
        dim_state=1,
        field=f,
        subfields=_dyadic_subfield,
        rho=rho,
        V=quadratic_candidate(1, lower=lambda x: 0.5 * float(x @ x), upper=lambda x: 0.5 * float(x @ x)),
        rule=SelectionRule.direct(),
        x0=np.array([x0]),
        point=np.zeros(1),
        defaults=dict(dt=1e-3, tfinal=1.0, delta=1e-3, samples=500, deltas=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]),
        params=dict(x0=x0),
        description="countable family with dyadic switching; switching accumulates at x = 0",
    )


# --------------------------------------------------------------------------
# two subsystems sharing max(|x1|, |x2|) whose union hull is not decreasing

def _g1(x, t):
    return np.array([x[0], 0.0])


def _g2(x, t):
    return np.array([0.0, x[1]])


def _g3(x, t):
    return np.array([-x[0], -x[1]])


def _two_piece(first: Callable, first_region: Callable, second: Callable) -> PiecewiseField:
    return PiecewiseField(
        2,
        [Piece(first_region, SmoothField(2, first)), Piece(lambda x, t: True, SmoothField(2, second))],
        [lambda x, t: abs(x[0]) == abs(x[1])],
    )


def _x1_below(x, t):
    return abs(x[0]) < abs(x[1])


def _x1_above(x, t):
    return abs(x[0]) > abs(x[1])


def sec7_counterexample(variant: str = "corrected", x0=(1.0, 1.0), probe_delta: float = 1e-6) -> Scenario:
    """``variant="printed"`` uses g2 where |x1| < |x2| for the second subsystem,
    which makes that subsystem increase V off the surface.  ``"corrected"``
    swaps its regions so that both subsystems are non-increasing for
    max(|x1|, |x2|), with only the union hull failing on |x1| = |x2|."""
    f1 = _two_piece(_g1, _x1_below, _g3)
    if variant == "corrected":
        f2 = _two_piece(_g2, _x1_above, _g3)
    elif variant == "printed":
        f2 = _two_piece(_g2, _x1_below, _g3)
    else:
        raise ValueError(f"unknown variant {variant!r}; expected 'corrected' or 'printed'")
    subfields = {1: f1, 2: f2}
    rho = SwitchingSignal(lambda x, t: 1 if x[0] * x[1] >= 1.0 else 2, (1, 2), (lambda x, t: x[0] * x[1] == 1.0,))
    f = SwitchedField(subfields, rho)

    def set_map(sub):
        return lambda x, t: analytic_regularization(sub, x, t, probe_delta)

    maps = {k: set_map(sub) for k, sub in subfields.items()}

    def union_map(x, t):
        return union_hull([m(x, t) for m in maps.values()]).unique()

    def expanding(x, t, F):
        return 0.5 * np.asarray(x, dtype=float)

    linf = lambda x: float(np.max(np.abs(x)))  # noqa: E731
    V = linf_norm_candidate(2, lower=lambda x: 0.5 * linf(x), upper=lambda x: 2.0 * linf(x))
    return Scenario(
        name="sec7_counterexample",
        dim_state=2,
        field=f,
        subfields=subfields,
        rho=rho,
        V=V,
        V_family=[V],
        rule=SelectionRule.custom(expanding, union_map, needs_set=False),
        x0=np.asarray(x0, dtype=float),
        point=np.array([1.0, 1.0]),
        set_maps=maps,
        defaults=dict(dt=1e-3, tfinal=1.0, grid="-2:2:21,-2:2:21", mode="lower", delta=1e-3, samples=500, tol=1e-9),
        params=dict(variant=variant, x0=list(map(float, x0))),
        description="common min-max decrease for each subsystem, growth along q = x/2 for their union hull",
    )


# --------------------------------------------------------------------------
# adaptive regulation with a signum robustifying term

def _adaptive_modal(n: int, regressors: Mapping, thetas_len: int, ds: Mapping, ks: Mapping, betas: Mapping,
                    rho: Callable) -> ModalField:
    """z = [x; theta_tilde]; x' = -k x + Y theta_tilde + d - beta u, theta_tilde' = -Y^T x."""
    dim = n + thetas_len
    B_cache = {}

    def split(z, t):
        x, th = z[:n], z[n:]
        s = rho(x, t)
        Y = regressors[s](x, t)
        a = np.empty(dim)
        a[:n] = -ks[s] * x + Y @ th + ds[s](t)
        a[n:] = -(x @ Y)
        B = B_cache.get(s)
        if B is None:
            B = np.zeros((dim, n))
            B[:n, :n] = -betas[s] * np.eye(n)
            B_cache[s] = B
        return a, B

    surfaces = tuple(SwitchingSurface.coordinate(i, dim) for i in range(n))
    return ModalField.affine(dim, split, surfaces, label=lambda z, t: rho(z[:n], t))


def _check_gains(ks, betas, dbars, allow_violation):
    for s in ks:
        if ks[s] <= 0 or betas[s] <= 0:
            raise ValueError("gains k and beta must be positive")
        if betas[s] <= dbars[s]:
            msg = f"beta={betas[s]} does not exceed the disturbance bound {dbars[s]} for subsystem {s}"
            if not allow_violation:
                raise ValueError(msg + " (pass allow_violation=True to study this case)")
            warnings.warn(msg, stacklevel=3)


def _adaptive_V(dim: int, n: int, kmin: float) -> LyapunovCandidate:
    half = lambda z: 0.5 * float(z @ z)  # noqa: E731
    return quadratic_candidate(dim, lower=half, upper=half, decay=lambda z: kmin * float(z[:n] @ z[:n]))


def _wire_adaptive(name, n, L_total, regressors, ds, ks, betas, dbars, rho_fn, indices, x0, theta, theta_hat0,
                   boundaries, defaults, params, description):
    rho = SwitchingSignal(lambda x, t: rho_fn(np.asarray(x)[:n], t), indices, boundaries)
    modal = _adaptive_modal(n, regressors, L_total, ds, ks, betas, rho_fn)
    sub_modals = {
        s: _adaptive_modal(n, regressors, L_total, ds, ks, betas, (lambda x, t, s=s: s)) for s in indices
    }
    subfields = {s: m.piecewise() for s, m in sub_modals.items()}
    z0 = np.concatenate([np.asarray(x0, dtype=float), np.asarray(theta, dtype=float) - np.asarray(theta_hat0, dtype=float)])
    return Scenario(
        name=name,
        dim_state=n + L_total,
        field=modal.piecewise(),
        subfields=subfields,
        rho=rho,
        V=_adaptive_V(n + L_total, n, min(ks.values())),
        rule=SelectionRule.sliding(modal),
        x0=z0,
        point=z0,
        set_maps={s: m.regularization for s, m in sub_modals.items()},
        defaults=defaults,
        params=params,
        description=description,
        x_dims=n,
    )


def sec8_example1(n: int = 1, theta: float = 2.0, dbar: float = 0.5, k: float = 1.0, beta: float = 1.0,
                  x0=None, theta_hat0: float = 0.0, allow_violation: bool = False) -> Scenario:
    """x' = Y(x) theta + u + d(t) with Y(x) = x (L = 1) and d_i(t) = dbar sin(t + i)."""
    _check_gains({1: k}, {1: beta}, {1: dbar}, allow_violation)
    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.size != n:
        raise ValueError(f"x0 must have {n} entries")
    phase = np.arange(n, dtype=float)
    regressors = {1: lambda x, t: x.reshape(n, 1)}
    ds = {1: lambda t: dbar * np.sin(t + phase)}
    params = dict(n=n, L=1, theta=theta, dbar=dbar, k=k, beta=beta, x0=x0.tolist(), theta_hat0=theta_hat0)
    return _wire_adaptive(
        "sec8_example1", n, 1, regressors, ds, {1: k}, {1: beta}, {1: dbar}, lambda x, t: 1, (1,),
        x0, [theta], [theta_hat0], (), dict(dt=1e-3, tfinal=20.0, grid="-2:2:21,-2:2:21", mode="upper", tol=1e-9),
        params, "adaptive regulator with signum feedback; sliding on x = 0",
    )


def sec8_example2(thetas=(2.0, -1.0), dbars=(0.3, 0.6), ks=(1.0, 1.5), betas=None, period: float = 2.0,
                  x0: float = 1.0, allow_violation: bool = False) -> Scenario:
    """Two scalar subsystems with regressors Z_1 = x and Z_2 = sin(x)(1 + cos t)/2,
    stacked parameters and a time-periodic, state-dependent switching signal."""
    if len(thetas) != 2 or len(dbars) != 2 or len(ks) != 2:
        raise ValueError("this scenario has exactly two subsystems")
    betas = tuple(d + 0.5 for d in dbars) if betas is None else tuple(betas)
    idx = (1, 2)
    kk = dict(zip(idx, map(float, ks)))
    bb = dict(zip(idx, map(float, betas)))
    dd = dict(zip(idx, map(float, dbars)))
    _check_gains(kk, bb, dd, allow_violation)
    Z = {1: lambda x, t: x.reshape(1, 1), 2: lambda x, t: np.sin(x).reshape(1, 1) * 0.5 * (1.0 + np.cos(t))}

    def stacked(s):
        # Y_s = 1_s (x) Z_s: Z_s in block s, zeros elsewhere
        def Y(x, t):
            out = np.zeros((1, 2))
            out[:, s - 1:s] = Z[s](x, t)
            return out
        return Y

    regressors = {s: stacked(s) for s in idx}
    ds = {1: lambda t: dd[1] * np.sin(2.0 * t).reshape(1), 2: lambda t: dd[2] * np.cos(3.0 * t).reshape(1)}
    w = 2.0 * np.pi / period

    def rho_fn(x, t):
        return 1 if math.sin(w * t) + float(x[0]) >= 0.0 else 2

    boundary = lambda z, t: math.sin(w * t) + float(z[0]) == 0.0  # noqa: E731
    params = dict(thetas=list(thetas), dbars=list(dbars), ks=list(ks), betas=list(betas), period=period, x0=x0)
    return _wire_adaptive(
        "sec8_example2", 1, 2, regressors, ds, kk, bb, dd, rho_fn, idx, [x0], list(thetas), [0.0, 0.0],
        (boundary,), dict(dt=1e-3, tfinal=20.0, grid="-2:2:11,-2:2:11,-2:2:11", mode="upper", tol=1e-9),
        params, "arbitrary switching between two adaptive subsystems with distinct parameters",
    )


SCENARIOS = {
    "sec4_example": sec4_example,
    "sec7_counterexample": sec7_counterexample,
    "sec8_example1": sec8_example1,
    "sec8_example2": sec8_example2,
}


def resolve_name(name: str) -> str:
    if name in SCENARIOS:
        return name
    hits = [k for k in SCENARIOS if k.startswith(name)]
    if len(hits) == 1:
        return hits[0]
    known = ", ".join(SCENARIOS)
    raise UnknownScenarioError(f"unknown scenario {name!r}; known scenarios: {known}")


def scenario(name: str, **params) -> Scenario:
    """Build a scenario by name (unique prefixes such as ``sec7`` are accepted)."""
    return SCENARIOS[resolve_name(name)](**params)
