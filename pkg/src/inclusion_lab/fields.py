"""Discontinuous vector fields, switching signals and their regularizations.

Regularizations are estimated by sampling the field on a small ball and
taking the convex hull of the values.  The intersection over shrinking
radii is replaced by a single small radius; hulls are nested in the
radius, so this is an inner estimate that tightens as the radius shrinks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from functools import lru_cache

from scipy.special import ndtri
from scipy.stats import qmc

from .hull import Polytope, excess, union_hull

Predicate = Callable[[np.ndarray, float], bool]


class CoverageError(RuntimeError):
    """No piece of a field (or candidate) covers the queried point."""


class SwitchingError(KeyError):
    pass


class NullSetError(RuntimeError):
    pass


@dataclass(frozen=True)
class SmoothField:
    dim_state: int
    func: Callable[[np.ndarray, float], np.ndarray]

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float), t), dtype=float).reshape(self.dim_state)


@dataclass(frozen=True)
class Piece:
    """A field restricted to a region.

    ``active`` optionally overrides the sampling-based test for whether
    the region has interior near a point: ``active(x, t, delta) -> bool``.
    """

    region: Predicate
    field: SmoothField
    active: Callable[[np.ndarray, float, float], bool] | None = None


def everywhere(x, t) -> bool:
    return True


@dataclass
class PiecewiseField:
    """Finite family of smooth pieces; the first piece whose region holds wins."""

    dim_state: int
    pieces: list[Piece]
    null_sets: list[Predicate] = field(default_factory=list)
    local_bound: Callable | None = None

    @classmethod
    def smooth(cls, dim_state: int, func) -> "PiecewiseField":
        return cls(dim_state, [Piece(everywhere, SmoothField(dim_state, func))])

    def piece_index(self, x, t: float = 0.0) -> int:
        for i, piece in enumerate(self.pieces):
            if piece.region(x, t):
                return i
        raise CoverageError(f"coverage violated: no piece covers x={np.asarray(x).tolist()}, t={t}")

    def label(self, x, t: float = 0.0):
        return self.piece_index(x, t)

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.pieces[self.piece_index(x, t)].field(x, t)

    def in_null_set(self, x, t: float = 0.0) -> bool:
        return any(ns(x, t) for ns in self.null_sets)

    def candidate_pieces(self):
        return list(enumerate(self.pieces))


@dataclass(frozen=True)
class SwitchingSignal:
    """rho(x, t) -> subsystem index.

    ``indices`` is the finite index set when there is one (None for a
    countable family); ``boundaries`` declare the measure-zero switching loci.
    """

    func: Callable[[np.ndarray, float], int]
    indices: tuple | None = None
    boundaries: tuple = ()

    def __call__(self, x, t: float = 0.0) -> int:
        return self.func(np.asarray(x, dtype=float), t)

    @classmethod
    def constant(cls, sigma) -> "SwitchingSignal":
        return cls(lambda x, t: sigma, (sigma,))


class SwitchedField(PiecewiseField):
    """f(x, t) = f_rho(x,t)(x, t).

    ``subfields`` is a mapping from indices to fields, or a callable for
    countable families.  Pieces are only enumerable for finite mappings.
    """

    def __init__(self, subfields, rho: SwitchingSignal, dim_state: int | None = None):
        self.subfields = subfields
        self.rho = rho
        if isinstance(subfields, Mapping):
            if not subfields:
                raise ValueError("no subfields given")
            dims = {f.dim_state for f in subfields.values()}
            if len(dims) != 1:
                raise ValueError(f"subfields have mixed dimensions {sorted(dims)}")
            dim_state = dims.pop()
        elif dim_state is None:
            if not rho.indices:
                raise ValueError("dim_state is required for a countable family without listed indices")
            dim_state = subfields(rho.indices[0]).dim_state
        super().__init__(dim_state, [], [self._active_null_set, *rho.boundaries])

    def _sub(self, sigma) -> PiecewiseField:
        try:
            return self.subfields[sigma] if isinstance(self.subfields, Mapping) else self.subfields(sigma)
        except (KeyError, IndexError) as exc:
            raise SwitchingError(f"unknown subsystem index {sigma!r}") from exc

    def subfield(self, sigma) -> PiecewiseField:
        return self._sub(sigma)

    def _active_null_set(self, x, t) -> bool:
        return self._sub(self.rho(x, t)).in_null_set(x, t)

    def label(self, x, t: float = 0.0):
        return self.rho(x, t)

    def piece_index(self, x, t: float = 0.0):
        sigma = self.rho(x, t)
        try:
            return sigma, self._sub(sigma).piece_index(x, t)
        except SwitchingError as exc:
            raise SwitchingError(f"rho returned unknown index {sigma!r} at x={np.asarray(x).tolist()}, t={t}") from exc

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        sigma, i = self.piece_index(x, t)
        return self._sub(sigma).pieces[i].field(x, t)

    def candidate_pieces(self):
        if not isinstance(self.subfields, Mapping):
            raise TypeError("pieces of a countable switched family cannot be enumerated")
        return [((s, i), p) for s, sub in self.subfields.items() for i, p in enumerate(sub.pieces)]


def assemble_switched(subfields, rho: SwitchingSignal, dim_state: int | None = None) -> SwitchedField:
    return SwitchedField(subfields, rho, dim_state)


# --------------------------------------------------------------------------
# sampling

def ball_samples(x, delta: float, n: int, seed: int) -> np.ndarray:
    """n points uniform in the open ball B(x, delta)."""
    x = np.asarray(x, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    d = x.size
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = delta * rng.random(n) ** (1.0 / d)
    return x + g * r[:, None]


@lru_cache(maxsize=32)
def _unit_halton_ball(d: int, n: int) -> np.ndarray:
    u = qmc.Halton(d + 1, scramble=False).random(n + 1)[1:]
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = ndtri(u[:, :d])
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    pts = g / norms * (u[:, d] ** (1.0 / d))[:, None]
    pts.setflags(write=False)
    return pts


def halton_ball(x, radius: float, n: int = 64) -> np.ndarray:
    """Deterministic low-discrepancy points in B(x, radius)."""
    x = np.asarray(x, dtype=float).ravel()
    return x + radius * _unit_halton_ball(x.size, n)


def _check_args(delta: float, n_samples: int) -> None:
    if not delta > 0:
        raise ValueError("delta must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")


def krasovskii_estimate(f: PiecewiseField, x, t: float, delta: float, n_samples: int, seed: int = 0) -> Polytope:
    """co of f over n_samples points of B(x, delta), plus f(x) itself."""
    _check_args(delta, n_samples)
    x = np.asarray(x, dtype=float).ravel()
    Y = ball_samples(x, delta, n_samples, seed)
    values = [f(x, t)] + [f(y, t) for y in Y]
    return Polytope(np.array(values)).unique()


def filippov_estimate(
    f: PiecewiseField, x, t: float, delta: float, n_samples: int, seed: int = 0, max_redraws: int = 100
) -> Polytope:
    """Like the Krasovskii estimate, but samples on declared null sets are redrawn
    and the center is not included."""
    _check_args(delta, n_samples)
    x = np.asarray(x, dtype=float).ravel()
    Y = ball_samples(x, delta, n_samples, seed)
    rng = np.random.default_rng([seed, 1])
    hits = 0
    values = []
    for y in Y:
        tries = 0
        while f.in_null_set(y, t):
            hits += 1
            tries += 1
            if tries > max_redraws:
                break
            y = ball_samples(x, delta, 1, int(rng.integers(2**63)))[0]
        if tries > max_redraws:
            continue
        values.append(f(y, t))
    if hits > 0.5 * n_samples or not values:
        raise NullSetError("null-set predicate not measure-zero")
    return Polytope(np.array(values)).unique()


def essentially_active(f: PiecewiseField, x, t: float, delta: float, n_probe: int = 64) -> list:
    """Labels of pieces whose region has interior in every small ball around x."""
    x = np.asarray(x, dtype=float).ravel()
    found = []
    custom = [(lab, p) for lab, p in f.candidate_pieces() if p.active is not None]
    for lab, p in custom:
        if p.active(x, t, delta):
            found.append(lab)
    if len(custom) < len(f.candidate_pieces()):
        custom_labels = {lab for lab, _ in custom}
        for y in halton_ball(x, delta / 2, n_probe):
            if f.in_null_set(y, t):
                continue
            lab = f.piece_index(y, t)
            if lab not in found and lab not in custom_labels:
                found.append(lab)
    return found


def _piece_by_label(f: PiecewiseField, label) -> Piece:
    if isinstance(f, SwitchedField):
        sigma, i = label
        return f.subfield(sigma).pieces[i]
    return f.pieces[label]


def piece_field(f: PiecewiseField, label) -> SmoothField:
    """The smooth field of the piece with the given label (as from ``piece_index``)."""
    return _piece_by_label(f, label).field


def analytic_regularization(f: PiecewiseField, x, t: float = 0.0, delta: float = 1e-6) -> Polytope:
    """co{ piece_i(x, t) : piece i essentially active at x }."""
    x = np.asarray(x, dtype=float).ravel()
    labels = essentially_active(f, x, t, delta)
    if not labels:
        raise CoverageError(f"coverage violated at x={x.tolist()}, t={t}")
    values = [_piece_by_label(f, lab).field(x, t) for lab in labels]
    return Polytope(np.array(values)).unique()


def diameter_schedule(f: PiecewiseField, x, t: float, deltas: Sequence[float], n_samples: int, seed: int = 0,
                      kind: str = "krasovskii") -> list[tuple[float, float]]:
    """Hull diameter of the estimate at each radius, to eyeball convergence."""
    est = krasovskii_estimate if kind == "krasovskii" else filippov_estimate
    return [(d, est(f, x, t, d, n_samples, seed).diameter()) for d in deltas]


# --------------------------------------------------------------------------
# containment of the switched regularization in the hull of the subsystems'

@dataclass(frozen=True)
class ContainmentReport:
    holds: bool
    inflation_needed: float
    indices: tuple
    switched: Polytope
    union: Polytope


def attained_indices(rho: SwitchingSignal, x, t: float, delta: float, n_samples: int, seed: int = 0,
                     samples: np.ndarray | None = None) -> list:
    x = np.asarray(x, dtype=float).ravel()
    seen = [rho(x, t)]
    Y = ball_samples(x, delta, n_samples, seed) if samples is None else samples
    for y in Y:
        s = rho(y, t)
        if s not in seen:
            seen.append(s)
    return seen


def containment_check(
    subfields,
    rho: SwitchingSignal,
    x,
    t: float,
    delta: float,
    n_samples: int,
    tol: float = 1e-9,
    *,
    reg_delta: float | None = None,
    seed: int = 0,
    kind: str = "krasovskii",
) -> ContainmentReport:
    """Check K(x,t) inside co U_sigma K_sigma(x,t) at one point.

    ``delta`` is the radius on which the attained index set is probed
    (the locally-finite switching radius).  The regularizations themselves
    are estimated at ``reg_delta`` (default ``delta * 1e-12``); every
    estimate shares the seed, so all hulls are built from the same points.
    """
    if reg_delta is None:
        reg_delta = delta * 1e-12
    est = krasovskii_estimate if kind == "krasovskii" else filippov_estimate
    x = np.asarray(x, dtype=float).ravel()
    switched = assemble_switched(subfields, rho, dim_state=x.size)
    indices = attained_indices(rho, x, t, delta, n_samples, seed)
    K = est(switched, x, t, reg_delta, n_samples, seed)
    parts = [est(switched.subfield(s), x, t, reg_delta, n_samples, seed) for s in indices]
    U = union_hull(parts).unique()
    gap = excess(K, U)
    return ContainmentReport(gap <= tol, gap, tuple(indices), K, U)


# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeReport:
    deltas: tuple
    counts: tuple
    refined_counts: tuple
    finite_at: float | None
    note: str = "empirical sampling probe, not a proof"


def assumption_probe(
    rho: SwitchingSignal, x, t: float, deltas: Sequence[float], n_samples: int, seed: int = 0,
    cap: int = 64, refine: int = 16,
) -> ProbeReport:
    """Count distinct indices of rho on sampled balls of decreasing radius.

    A radius counts as locally finite when the count is below ``cap`` and
    does not grow when the sample is enlarged ``refine``-fold.
    """
    deltas = tuple(float(d) for d in deltas)
    if any(d <= 0 for d in deltas) or any(b > a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be positive and decreasing")
    counts, refined = [], []
    finite_at = None
    for d in deltas:
        Y = ball_samples(x, d, n_samples * refine, seed)
        big = attained_indices(rho, x, t, d, 0, samples=Y)
        small = attained_indices(rho, x, t, d, 0, samples=Y[:n_samples])
        counts.append(len(small))
        refined.append(len(big))
        if finite_at is None and len(big) == len(small) and len(big) < cap:
            finite_at = d
    return ProbeReport(deltas, tuple(counts), tuple(refined), finite_at)
