"""Dense two-phase tableau simplex with Bland's rule.

Solves ``min c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0``.
Problem sizes here are a few dozen variables at most, so the dense
tableau is perfectly adequate and Bland's rule rules out cycling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None = None
    fun: float | None = None

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    T[:, col] = 0.0
    T[row, col] = 1.0


def _run(T: np.ndarray, basis: list[int], ncols: int, tol: float, max_iter: int) -> str:
    """Iterate on tableau ``T`` whose last row holds reduced costs.

    Only the first ``ncols`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    for _ in range(max_iter):
        cost = T[-1, :ncols]
        entering = np.flatnonzero(cost < -tol)
        if entering.size == 0:
            return OPTIMAL
        col = int(entering[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return UNBOUNDED
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows leave the lowest-index basic variable
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def linprog(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    tol: float = 1e-11,
    max_iter: int = 5000,
) -> LPResult:
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise ValueError("constraint shapes do not match the cost vector")

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    nvar = n + m_ub  # structural + slack
    A = np.zeros((m, nvar))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1 with one artificial per row
    T = np.zeros((m + 1, nvar + m + 1))
    T[:m, :nvar] = A
    T[:m, nvar:nvar + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :nvar] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(nvar, nvar + m))
    _run(T, basis, nvar, tol, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[-1, -1] > 1e-9 * scale:
        return LPResult(INFEASIBLE)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] < nvar:
            keep.append(r)
            continue
        cols = np.flatnonzero(np.abs(T[r, :nvar]) > 1e-9)
        if cols.size:
            _pivot(T, r, int(cols[0]))
            basis[r] = int(cols[0])
            keep.append(r)
    T2 = np.zeros((len(keep) + 1, nvar + 1))
    T2[:-1, :nvar] = T[keep, :nvar]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[r] for r in keep]
    cost = np.zeros(nvar)
    cost[:n] = c
    T2[-1, :nvar] = cost
    for r, j in enumerate(basis):
        if cost[j] != 0.0:
            T2[-1] -= cost[j] * T2[r]
    status = _run(T2, basis, nvar, tol, max_iter)
    if status != OPTIMAL:
        return LPResult(status)
    x = np.zeros(nvar)
    for r, j in enumerate(basis):
        x[j] = T2[r, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult(OPTIMAL, x, float(c @ x))
