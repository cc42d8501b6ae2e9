"""Piecewise-C1 candidate Lyapunov functions and their Clarke gradients.

Gradients live in R^{n+1}: the state gradient followed by the partial
derivative in time.  A piece's region is given as a *margin* function,
``region(x, t) <= 0`` inside, so that activity can be decided up to a
tolerance.  For max-type candidates the margin of piece i is
``max_j V_j - V_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import CoverageError
from .hull import Polytope

Scalar = Callable[[np.ndarray, float], float]


@dataclass(frozen=True)
class CandidatePiece:
    region: Callable[[np.ndarray, float], float]
    value: Scalar
    gradient: Callable[[np.ndarray, float], np.ndarray]


def _zero(x, *args) -> float:
    return 0.0


@dataclass
class LyapunovCandidate:
    """V with lower/upper sandwich bounds and a decay bound W (all of x only)."""

    dim_state: int
    pieces: list[CandidatePiece]
    regular: bool = True
    lower: Callable[[np.ndarray], float] | None = None
    upper: Callable[[np.ndarray], float] | None = None
    decay: Callable[[np.ndarray], float] = field(default=_zero)

    def margins(self, x, t: float = 0.0) -> np.ndarray:
        return np.array([p.region(x, t) for p in self.pieces])

    def __call__(self, x, t: float = 0.0) -> float:
        x = np.asarray(x, dtype=float)
        m = self.margins(x, t)
        return float(self.pieces[int(np.argmin(m))].value(x, t))

    def W(self, x) -> float:
        return float(self.decay(np.asarray(x, dtype=float)))

    @classmethod
    def smooth(cls, dim_state, value, gradient, **kw) -> "LyapunovCandidate":
        return cls(dim_state, [CandidatePiece(lambda x, t: 0.0, value, gradient)], **kw)

    @classmethod
    def max_of(cls, dim_state, values: Sequence[Scalar], gradients: Sequence, **kw) -> "LyapunovCandidate":
        """V = max_i V_i.  Such functions are regular, so ``regular`` defaults to True."""
        values = list(values)

        def margin(i):
            return lambda x, t: max(v(x, t) for v in values) - values[i](x, t)

        pieces = [CandidatePiece(margin(i), values[i], gradients[i]) for i in range(len(values))]
        return cls(dim_state, pieces, **kw)


def clarke_gradient(V: LyapunovCandidate, x, t: float = 0.0, activation_tol: float = 1e-9) -> Polytope:
    """co of the gradients of all pieces active at (x, t), as a polytope in R^{n+1}.

    Exact when the Clarke gradient is the hull of active-piece gradients
    (max-type candidates, piecewise-affine boundaries); an outer estimate otherwise.
    """
    x = np.asarray(x, dtype=float).ravel()
    m = V.margins(x, t)
    active = np.flatnonzero(m <= activation_tol)
    if active.size == 0:
        raise CoverageError(f"coverage violated: no active candidate piece at x={x.tolist()}, t={t}")
    grads = [np.asarray(V.pieces[i].gradient(x, t), dtype=float).ravel() for i in active]
    for g in grads:
        if g.size != V.dim_state + 1:
            raise ValueError(f"gradient must have length {V.dim_state + 1} (state + time)")
    return Polytope(np.array(grads)).unique()


@dataclass(frozen=True)
class BoundsReport:
    passed: bool
    checked: int
    violations: list

    def __bool__(self):
        return self.passed


def check_bounds(V: LyapunovCandidate, grid, tol: float = 1e-12) -> BoundsReport:
    """Check lower(x) <= V(x, t) <= upper(x) at every (x, t) in the grid."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    violations = []
    for x, t in grid:
        x = np.asarray(x, dtype=float)
        v = V(x, t)
        lo = V.lower(x) if V.lower is not None else v
        hi = V.upper(x) if V.upper is not None else v
        if lo > v + tol:
            violations.append((x.tolist(), t, "lower", lo - v))
        if v > hi + tol:
            violations.append((x.tolist(), t, "upper", v - hi))
    return BoundsReport(not violations, len(grid), violations)


def check_gradients(V: LyapunovCandidate, points, rtol: float = 1e-5, h: float = 1e-6) -> list:
    """Central-difference spot check of each piece's gradient where it alone is active."""
    bad = []
    for x, t in points:
        x = np.asarray(x, dtype=float)
        m = V.margins(x, t)
        i = int(np.argmin(m))
        piece = V.pieces[i]
        z = np.append(x, t)
        fd = np.empty(z.size)
        for k in range(z.size):
            e = np.zeros(z.size)
            e[k] = h
            fd[k] = (piece.value((z + e)[:-1], (z + e)[-1]) - piece.value((z - e)[:-1], (z - e)[-1])) / (2 * h)
        g = np.asarray(piece.gradient(x, t), dtype=float)
        if np.linalg.norm(g - fd) > rtol * max(1.0, np.linalg.norm(fd)):
            bad.append((x.tolist(), t, g.tolist(), fd.tolist()))
    return bad


def linf_norm_candidate(dim_state: int, **kw) -> LyapunovCandidate:
    """V(x) = max_i |x_i| as the max of the 2n linear functions +-x_i."""
    values, grads = [], []
    for i in range(dim_state):
        for s in (1.0, -1.0):
            g = np.zeros(dim_state + 1)
            g[i] = s
            values.append(lambda x, t, i=i, s=s: s * x[i])
            grads.append(lambda x, t, g=g: g)
    return LyapunovCandidate.max_of(dim_state, values, grads, **kw)


def quadratic_candidate(dim_state: int, **kw) -> LyapunovCandidate:
    """V(z) = 0.5 z.z with gradient [z; 0]."""
    return LyapunovCandidate.smooth(
        dim_state,
        lambda z, t: 0.5 * float(np.dot(z, z)),
        lambda z, t: np.append(np.asarray(z, dtype=float), 0.0),
        **kw,
    )
