"""Vertex-represented convex sets.

A :class:`Polytope` stands for the convex hull of a finite point list.
Every query (support, membership, subset, min-max) reduces to either a
direct scan of the vertices, a least-distance problem over the simplex
of convex weights, or a tiny linear program.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ._simplex import linprog

DEFAULT_TOL = 1e-9


class DomainError(ValueError):
    """Invalid geometric input (non-finite data, dimension mismatch, ...)."""


class NotInHullError(DomainError):
    pass


@dataclass(frozen=True, eq=False)
class Polytope:
    """co(vertices); duplicates and interior points are allowed."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V.reshape(-1, 1) if V.size else V.reshape(0, 1)
        if V.ndim != 2 or V.shape[0] == 0 or V.shape[1] == 0:
            raise DomainError("a polytope needs a nonempty (m, dim) vertex array")
        if not np.all(np.isfinite(V)):
            raise DomainError("polytope vertices must be finite")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @classmethod
    def point(cls, p) -> "Polytope":
        return cls(np.asarray(p, dtype=float).reshape(1, -1))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def __repr__(self) -> str:
        return f"Polytope(dim={self.dim}, n_vertices={len(self)})"

    @cached_property
    def _vertex_keys(self) -> frozenset:
        return frozenset(v.tobytes() for v in self.vertices)

    def unique(self) -> "Polytope":
        """Drop exact duplicate vertices, keeping first occurrences in order."""
        _, idx = np.unique(self.vertices, axis=0, return_index=True)
        if idx.size == len(self):
            return self
        return Polytope(self.vertices[np.sort(idx)])

    def diameter(self) -> float:
        V = self.vertices
        if len(V) == 1:
            return 0.0
        diff = V[:, None, :] - V[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=-1)).max())

    def lift(self, value: float = 1.0) -> "Polytope":
        """Append a constant coordinate, q -> [q; value]."""
        col = np.full((len(self), 1), value)
        return Polytope(np.hstack([self.vertices, col]))


@dataclass(frozen=True)
class ConvexWeights:
    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.weights):
            raise DomainError("indices and weights differ in length")
        w = np.asarray(self.weights, dtype=float)
        if w.size and (w.min() < -1e-12 or abs(w.sum() - 1.0) > 1e-12):
            raise DomainError("weights are not convex")

    def point(self, P: Polytope) -> np.ndarray:
        return np.asarray(self.weights) @ P.vertices[list(self.indices)]


def _as_point(q, dim: int) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if q.size != dim:
        raise DomainError(f"expected a point of dimension {dim}, got {q.size}")
    if not np.all(np.isfinite(q)):
        raise DomainError("point must be finite")
    return q


def support(P: Polytope, c) -> tuple[float, int]:
    """max over vertices of c @ v, with the lowest maximizing index."""
    c = _as_point(c, P.dim)
    values = P.vertices @ c
    k = int(np.argmax(values))
    return float(values[k]), k


def _min_norm_point(X: np.ndarray, max_iter: int):
    """Wolfe's active-set method for the min-norm point of co(rows of X).

    Returns (point, support_indices, weights).  Rows are rescaled to unit
    size first; the min-norm point is scale covariant.
    """
    m, d = X.shape
    sq = np.einsum("ij,ij->i", X, X)
    s = float(np.sqrt(sq.max()))
    if s == 0.0:
        return X[0].copy(), [0], np.array([1.0])
    X = X / s
    sq = sq / (s * s)
    j = int(np.argmin(sq))
    S = [j]
    w = np.array([1.0])
    x = X[j].copy()
    prev = float(x @ x)
    for _ in range(max_iter):
        if prev == 0.0:
            break
        dots = X @ x
        j = int(np.argmin(dots))
        if prev - dots[j] <= 1e-12 or j in S:
            break
        S_old, w_old = list(S), w.copy()
        S.append(j)
        w = np.append(w, 0.0)
        for _minor in range(len(S) + 1):  # each minor cycle drops at least one point
            XS = X[S]
            k = len(S)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = XS @ XS.T
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            alpha = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
            if not np.all(np.isfinite(alpha)):
                S, w = S_old, w_old
                break
            if np.all(alpha > 1e-15):
                w = alpha
                break
            # step from w toward alpha until a weight hits zero
            mask = (alpha <= 1e-15) & (w - alpha > 0)
            theta = min(1.0, float(np.min(w[mask] / (w[mask] - alpha[mask])))) if mask.any() else 1.0
            w = theta * alpha + (1.0 - theta) * w
            keep = w > 1e-15
            if not keep.any():
                keep[np.argmax(w)] = True
            S = [i for i, kp in zip(S, keep) if kp]
            w = w[keep]
            w = w / w.sum()
        x = w @ X[S]
        cur = float(x @ x)
        if prev - cur < 1e-14:
            prev = min(prev, cur)
            break
        prev = cur
    return x * s, S, w


def nearest_point(P: Polytope, q) -> tuple[float, ConvexWeights]:
    """Distance from q to co(P) and convex weights of the nearest point."""
    q = _as_point(q, P.dim)
    X = P.vertices - q
    cap = max(10 * P.dim * len(P), 10)
    x, S, w = _min_norm_point(X, cap)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return float(np.linalg.norm(x)), ConvexWeights(tuple(int(s) for s in S), tuple(float(v) for v in w))


def distance(P: Polytope, q) -> float:
    q = _as_point(q, P.dim)
    if q.tobytes() in P._vertex_keys:
        return 0.0
    return nearest_point(P, q)[0]


def contains(P: Polytope, q, tol: float = DEFAULT_TOL) -> bool:
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    q = _as_point(q, P.dim)
    if q.tobytes() in P._vertex_keys:
        return True
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    if np.any(q < lo - tol) or np.any(q > hi + tol):
        return False
    return nearest_point(P, q)[0] <= tol


def reduce_weights(vertices, weights, tol: float = 1e-12) -> ConvexWeights:
    """Carathéodory reduction of a convex combination.

    Repeatedly finds an affine dependence among the supporting vertices
    and shifts weight along it until one coefficient vanishes.  The
    result has affinely independent support, hence at most dim+1 points,
    and reconstructs the same point.
    """
    V = np.asarray(vertices, dtype=float)
    w = np.asarray(weights, dtype=float).copy()
    idx = np.flatnonzero(w > tol)
    w = w[idx]
    d = V.shape[1]
    while idx.size > 1:
        M = np.vstack([V[idx].T, np.ones(idx.size)])
        _, s, vt = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
        if rank == idx.size and idx.size <= d + 1:
            break
        mu = vt[-1]
        if mu.max() <= 0:
            mu = -mu
        pos = mu > 0
        ratios = np.full(mu.size, np.inf)
        ratios[pos] = w[pos] / mu[pos]
        k = int(np.argmin(ratios))
        w = w - ratios[k] * mu
        w[k] = 0.0
        keep = w > tol
        idx, w = idx[keep], w[keep]
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return ConvexWeights(tuple(int(i) for i in idx), tuple(float(v) for v in w))


def caratheodory_reduce(P: Polytope, q, tol: float = DEFAULT_TOL) -> ConvexWeights:
    q = _as_point(q, P.dim)
    dist, cw = nearest_point(P, q)
    if dist > tol:
        raise NotInHullError(f"not in hull (distance {dist:.3g})")
    w = np.zeros(len(P))
    w[list(cw.indices)] = cw.weights
    return reduce_weights(P.vertices, w)


def union_hull(polytopes: Sequence[Polytope]) -> Polytope:
    polytopes = list(polytopes)
    if not polytopes:
        raise DomainError("union_hull needs at least one polytope")
    dims = {P.dim for P in polytopes}
    if len(dims) != 1:
        raise DomainError(f"mixed dimensions {sorted(dims)}")
    if len(polytopes) == 1:
        return polytopes[0]
    return Polytope(np.vstack([P.vertices for P in polytopes]))


def _check_same_dim(A: Polytope, B: Polytope) -> None:
    if A.dim != B.dim:
        raise DomainError(f"dimension mismatch: {A.dim} vs {B.dim}")


def hull_subset(A: Polytope, B: Polytope, tol: float = DEFAULT_TOL) -> bool:
    _check_same_dim(A, B)
    return all(contains(B, a, tol) for a in A.vertices)


def excess(A: Polytope, B: Polytope) -> float:
    """Smallest eps with co(A) inside co(B) inflated by eps.

    Distance to a convex set is convex, so the sup over co(A) sits at a vertex.
    """
    _check_same_dim(A, B)
    return max(distance(B, a) for a in A.vertices)


def hausdorff(A: Polytope, B: Polytope) -> float:
    return max(excess(A, B), excess(B, A))


def _min_max_lp(P: np.ndarray, Q: np.ndarray, A: np.ndarray | None = None, eps: float = 0.0):
    """min over p in co(P) of max over q in {Q @ mu : mu in simplex, |A mu| <= eps} of p @ q.

    The inner max is replaced by its LP dual so the whole thing is one LP.
    Variables: lambda (|P|), gamma+ , gamma-, and (alpha, beta) >= 0 for the
    two-sided relaxed equalities.  Returns (value, lambda) or None when the
    inner feasible set is empty.
    """
    m, k = P.shape[0], Q.shape[0]
    M = Q @ P.T  # M[j, i] = p_i . q_j
    r = 0 if A is None else A.shape[0]
    nvar = m + 2 + 2 * r
    c = np.zeros(nvar)
    c[m] = 1.0
    c[m + 1] = -1.0
    c[m + 2:] = eps
    A_ub = np.zeros((k, nvar))
    A_ub[:, :m] = M
    A_ub[:, m] = -1.0
    A_ub[:, m + 1] = 1.0
    if r:
        A_ub[:, m + 2:m + 2 + r] = -A.T
        A_ub[:, m + 2 + r:] = A.T
    A_eq = np.zeros((1, nvar))
    A_eq[0, :m] = 1.0
    res = linprog(c, A_ub, np.zeros(k), A_eq, np.ones(1))
    if not res.success:
        return None
    lam = res.x[:m]
    return res.fun, lam


def min_of_convex_max(Pp: Polytope, Qq: Polytope) -> float:
    """min over p in co(Pp) of max over q in co(Qq) of p @ q."""
    _check_same_dim(Pp, Qq)
    if len(Pp) == 1:
        return float((Qq.vertices @ Pp.vertices[0]).max())
    out = _min_max_lp(Pp.vertices, Qq.vertices)
    if out is None:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError("min-max LP failed")
    _, lam = out
    lam = np.clip(lam, 0.0, None)
    p = (lam / lam.sum()) @ Pp.vertices
    return float((Qq.vertices @ p).max())
