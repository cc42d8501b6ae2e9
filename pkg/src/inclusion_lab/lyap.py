"""Generalized time derivatives along set-valued maps and grid certification.

All sets are polytopes, so:

* the max-max derivative is a scan over vertex pairs (p.[q;1] is bilinear);
* the min-max derivative is one small LP (see :func:`hull.min_of_convex_max`);
* the reduced derivative restricts the velocity set by the affine
  equalities that make p.[q;1] constant over each reducing gradient set,
  and is again one LP.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._simplex import linprog
from .hull import DomainError, Polytope, _min_max_lp, min_of_convex_max, union_hull
from .nonsmooth import LyapunovCandidate, clarke_gradient

UPPER, LOWER, REDUCED = "upper", "lower", "reduced"
MODES = (UPPER, LOWER, REDUCED)


def _lifted(V: LyapunovCandidate, F: Polytope, x, t, activation_tol):
    P = clarke_gradient(V, x, t, activation_tol)
    if F.dim + 1 != P.dim:
        raise DomainError(f"velocity set has dim {F.dim}, gradient set has dim {P.dim}")
    return P, F.lift(1.0)


@dataclass(frozen=True)
class UpperDerivative:
    value: float
    witness_p: np.ndarray
    witness_q: np.ndarray


def gen_deriv_upper(V: LyapunovCandidate, F: Polytope, x, t: float = 0.0, activation_tol: float = 1e-9) -> UpperDerivative:
    """max over p in dV, q in F of p.[q;1], attained at a vertex pair."""
    P, Q = _lifted(V, F, x, t, activation_tol)
    vals = P.vertices @ Q.vertices.T
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return UpperDerivative(float(vals[i, j]), P.vertices[i], F.vertices[j])


def gen_deriv_lower(V: LyapunovCandidate, F: Polytope, x, t: float = 0.0, activation_tol: float = 1e-9) -> float:
    """min over p in dV of max over q in F of p.[q;1]."""
    if not V.regular:
        warnings.warn("min-max derivative used with a candidate not flagged regular", stacklevel=2)
    P, Q = _lifted(V, F, x, t, activation_tol)
    return min_of_convex_max(P, Q)


@dataclass(frozen=True)
class DerivativeSample:
    point: tuple
    upper: float
    lower: float
    witness_p: np.ndarray
    witness_q: np.ndarray
    margin: float


def sample_derivatives(V: LyapunovCandidate, F: Polytope, x, t: float = 0.0) -> DerivativeSample:
    up = gen_deriv_upper(V, F, x, t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lo = gen_deriv_lower(V, F, x, t)
    x = np.asarray(x, dtype=float)
    return DerivativeSample((tuple(x.tolist()), t), up.value, lo, up.witness_p, up.witness_q, -V.W(x) - up.value)


# --------------------------------------------------------------------------
# reduction by a family of regular functions

@dataclass(frozen=True)
class ReducedInclusion:
    """F intersected with {q : (p_j - p_0).[q;1] = 0 for each reducing gradient set}.

    Stored as the vertices of F plus the equality rows acting on convex
    weights mu over those vertices.
    """

    F: Polytope
    rows: np.ndarray  # (r, |F|)
    tol: float = 1e-9

    @property
    def eps(self) -> float:
        scale = float(np.abs(self.rows).max(initial=1.0))
        return self.tol * max(1.0, scale)

    def _constraints(self, nvar, eps):
        r = self.rows.shape[0]
        A_ub = np.zeros((2 * r, nvar))
        A_ub[:r, : len(self.F)] = self.rows
        A_ub[r:, : len(self.F)] = -self.rows
        return A_ub, np.full(2 * r, eps)

    def is_empty(self) -> bool:
        if self.rows.shape[0] == 0:
            return False
        m = len(self.F)
        A_ub, b_ub = self._constraints(m, self.eps)
        res = linprog(np.zeros(m), A_ub, b_ub, np.ones((1, m)), np.ones(1))
        return not res.success

    def max_linear(self, c) -> float | None:
        """max of c.q over the reduced set, None if it is empty.

        Equalities are imposed exactly first and relaxed to +-eps only if
        that is infeasible in floating point.
        """
        m = len(self.F)
        vals = self.F.vertices @ np.asarray(c, dtype=float)
        for eps in (0.0, self.eps):
            A_ub, b_ub = self._constraints(m, eps)
            res = linprog(-vals, A_ub, b_ub, np.ones((1, m)), np.ones(1))
            if res.success:
                return -res.fun
        return None

    def points(self) -> Polytope | None:
        """Vertices of F that satisfy the equalities (exact only when the reduced set is a face of F)."""
        ok = np.all(np.abs(self.rows) <= self.eps, axis=0) if self.rows.size else np.ones(len(self.F), bool)
        return Polytope(self.F.vertices[ok]) if ok.any() else None


def reduce_inclusion(V_family: Sequence[LyapunovCandidate], F: Polytope, x, t: float = 0.0,
                     activation_tol: float = 1e-9, tol: float = 1e-9) -> ReducedInclusion:
    Q = F.lift(1.0).vertices
    rows = []
    for Vi in V_family:
        P = clarke_gradient(Vi, x, t, activation_tol).vertices
        if P.shape[1] != Q.shape[1]:
            raise DomainError("reducing function and velocity set dimensions disagree")
        for pj in P[1:]:
            rows.append(Q @ (pj - P[0]))
    rows = np.array(rows) if rows else np.zeros((0, len(F)))
    return ReducedInclusion(F, rows, tol)


@dataclass(frozen=True)
class ReducedDerivative:
    """Value of the reduced min-max derivative; ``empty`` marks the -infinity convention."""

    value: float | None
    empty: bool = False

    def at_most(self, bound: float, tol: float = 0.0) -> bool:
        return self.empty or self.value <= bound + tol

    def __float__(self):
        return float("-inf") if self.empty else float(self.value)


def gen_deriv_reduced(V: LyapunovCandidate, V_family, F: Polytope, x, t: float = 0.0,
                      activation_tol: float = 1e-9, tol: float = 1e-9) -> ReducedDerivative:
    P, Q = _lifted(V, F, x, t, activation_tol)
    red = reduce_inclusion(V_family, F, x, t, activation_tol, tol)
    if red.is_empty():
        return ReducedDerivative(None, True)
    if red.rows.shape[0] == 0:
        return ReducedDerivative(min_of_convex_max(P, Q))
    out = _min_max_lp(P.vertices, Q.vertices, red.rows, 0.0)
    if out is None:
        out = _min_max_lp(P.vertices, Q.vertices, red.rows, red.eps)
    if out is None:  # pragma: no cover - nonempty inner set keeps the dual bounded
        return ReducedDerivative(None, True)
    lam = np.clip(out[1], 0.0, None)
    p = (lam / lam.sum()) @ P.vertices
    # inner max over the reduced set at the optimal gradient
    return ReducedDerivative(float(red.max_linear(p[:-1]) + p[-1]))


# --------------------------------------------------------------------------
# certification over a grid

@dataclass
class CertificationReport:
    mode: str
    n_points: int
    passes: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    union_passes: int = 0
    union_failures: list = field(default_factory=list)  # (grid index, point, t, derivative + W)
    worst_margin: float = float("inf")
    worst_location: tuple | None = None
    worst_system: object = None
    note: str = "grid-empirical check, not a proof"

    @property
    def subsystems_pass(self) -> bool:
        return all(v == 0 for v in self.failures.values())

    @property
    def union_pass(self) -> bool:
        return not self.union_failures

    @property
    def passed(self) -> bool:
        return self.subsystems_pass and self.union_pass


def _threads() -> int:
    n = int(os.environ.get("INCLUSION_LAB_THREADS", "0") or 0)
    return n if n > 0 else min(8, os.cpu_count() or 1)


def derivative(mode: str, V: LyapunovCandidate, F: Polytope, x, t, V_family=None) -> float:
    if mode == UPPER:
        return gen_deriv_upper(V, F, x, t).value
    if mode == LOWER:
        return gen_deriv_lower(V, F, x, t)
    if mode == REDUCED:
        return float(gen_deriv_reduced(V, V_family or [V], F, x, t))
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def certify(
    V: LyapunovCandidate,
    subfamilies: Mapping[object, Callable[[np.ndarray, float], Polytope]],
    grid: Sequence[tuple],
    mode: str = UPPER,
    tol: float = 1e-9,
    V_family=None,
    union: bool = True,
    workers: int | None = None,
) -> CertificationReport:
    """Check derivative <= -W(x) + tol for every subsystem map and their union hull.

    ``grid`` is a sequence of (x, t) pairs; the margin reported is
    -W(x) - derivative, so negative margins are violations.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == LOWER and not V.regular:
        warnings.warn("mode='lower' requires a regular candidate", stacklevel=2)
    grid = [(np.asarray(x, dtype=float), float(t)) for x, t in grid]
    keys = list(subfamilies)

    def one(item):
        k, (x, t) = item
        W = V.W(x)
        sets = {}
        out = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for key in keys:
                try:
                    F = subfamilies[key](x, t)
                except Exception as exc:
                    raise RuntimeError(f"set-valued map {key!r} failed at grid point {k} x={x.tolist()}, t={t}") from exc
                sets[key] = F
                out[key] = -W - derivative(mode, V, F, x, t, V_family)
            u = -W - derivative(mode, V, union_hull(list(sets.values())), x, t, V_family) if union else None
        return k, x, t, W, out, u

    nw = workers if workers is not None else _threads()
    items = list(enumerate(grid))
    if nw > 1 and len(items) > 1:
        with ThreadPoolExecutor(nw) as ex:
            results = list(ex.map(one, items))
    else:
        results = [one(it) for it in items]

    rep = CertificationReport(mode, len(grid), {k: 0 for k in keys}, {k: 0 for k in keys})
    for k, x, t, W, out, u in results:  # deterministic grid order
        for key, margin in out.items():
            if margin >= -tol:
                rep.passes[key] += 1
            else:
                rep.failures[key] += 1
            if margin < rep.worst_margin:
                rep.worst_margin, rep.worst_location, rep.worst_system = margin, (x.tolist(), t), key
        if u is not None:
            if u >= -tol:
                rep.union_passes += 1
            else:
                rep.union_failures.append((k, x.tolist(), t, -u))
    return rep


def rectangular_grid(axes: Sequence[tuple[float, float, int]], times: Sequence[float] = (0.0,)) -> list:
    """Tensor grid from (min, max, count) per axis, symmetric about the midpoint."""
    cols = []
    for lo, hi, n in axes:
        if n < 2:
            raise ValueError("grid counts must be at least 2")
        i = np.arange(n)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        c = mid + half * (2 * i - (n - 1)) / (n - 1)
        cols.append(c)
    mesh = np.meshgrid(*cols, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return [(p, float(t)) for t in times for p in pts]


def parse_grid(spec: str) -> list[tuple[float, float, int]]:
    """Parse "lo:hi:n,lo:hi:n,..." into per-axis (lo, hi, n)."""
    axes = []
    for part in str(spec).split(","):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise ValueError(f"bad grid axis {part!r}; expected lo:hi:n")
        lo, hi, n = float(bits[0]), float(bits[1]), int(bits[2])
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
            raise ValueError(f"bad grid bounds in {part!r}")
        if n < 2:
            raise ValueError("grid counts must be at least 2")
        axes.append((lo, hi, n))
    return axes
