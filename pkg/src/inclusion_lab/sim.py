"""Fixed-step integration of discontinuous fields and inclusion selections.

Three selection rules are supported:

``direct``
    follow f(x, t) as assembled; region changes are located by bisection
    and the step is restarted at the crossing.
``sliding``
    for fields affine in a vector of switch values u (u_i = sgn s_i(x, t)
    off the surfaces), use the equivalent control on every surface where
    it lies in [-1, 1].  This is the Filippov solution on codimension-one
    switching surfaces.
``custom``
    any user selection q = select(x, t, F) from the regularized set F.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import Piece, PiecewiseField, SmoothField, piece_field
from .hull import Polytope, contains
from .nonsmooth import LyapunovCandidate

DIRECT, SLIDING, CUSTOM = "direct", "sliding", "custom"
_EMPTY = np.zeros(0)


class FiniteEscapeError(RuntimeError):
    def __init__(self, message: str, trajectory: "Trajectory"):
        super().__init__(message)
        self.trajectory = trajectory


class DegenerateSlidingError(RuntimeError):
    pass


class SelectionError(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    V_values: np.ndarray | None = None
    W_values: np.ndarray | None = None
    events: list = field(default_factory=list)  # (time, kind, detail)
    sliding: list = field(default_factory=list)  # per sample: tuple of sliding surface indices

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def event_at(self, k: int) -> str:
        t = self.times[k]
        kinds = [kind for (te, kind, _) in self.events if te == t]
        return "|".join(kinds)


@dataclass(frozen=True)
class SwitchingSurface:
    """s(x, t) = 0 with gradient in x."""

    value: Callable[[np.ndarray, float], float]
    gradient: Callable[[np.ndarray, float], np.ndarray]
    axis: int | None = None  # set for coordinate surfaces x_axis = 0

    @classmethod
    def coordinate(cls, i: int, n: int) -> "SwitchingSurface":
        e = np.zeros(n)
        e[i] = 1.0
        e.setflags(write=False)
        return cls(lambda x, t: float(x[i]), lambda x, t: e, i)


@dataclass(frozen=True)
class ModalField:
    """Field written as func(x, t, u), affine in each switch value u_i in [-1, 1].

    Off the surfaces u_i = sgn s_i(x, t).  ``label`` optionally exposes a
    switching signal whose changes are logged as events.
    """

    dim_state: int
    func: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    surfaces: tuple
    label: Callable | None = None
    split: Callable | None = None  # (x, t) -> (a, B) with func = a + B u

    @classmethod
    def affine(cls, dim_state: int, split, surfaces, label=None) -> "ModalField":
        """Build from drift a(x, t) and input matrix B(x, t) given together by ``split``."""

        def func(x, t, u):
            a, B = split(x, t)
            return a + B @ u

        return cls(dim_state, func, tuple(surfaces), label, split)

    def signs(self, x, t) -> np.ndarray:
        return np.sign([s.value(x, t) for s in self.surfaces])

    def __call__(self, x, t: float = 0.0, u=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = self.signs(x, t) if u is None else np.asarray(u, dtype=float)
        return np.asarray(self.func(x, t, u), dtype=float).reshape(self.dim_state)

    def regularization(self, x, t: float = 0.0) -> Polytope:
        """Exact regularization: u_i ranges over [-1, 1] on every surface through x.

        The field is affine in u, so the hull of the box-corner values is exact.
        """
        x = np.asarray(x, dtype=float)
        s = self.signs(x, t)
        free = np.flatnonzero(s == 0)
        values = []
        for corner in itertools.product((1.0, -1.0), repeat=free.size):
            u = s.copy()
            u[free] = corner
            values.append(self(x, t, u))
        return Polytope(np.array(values)).unique()

    def piecewise(self) -> PiecewiseField:
        """One piece per sign pattern; the surfaces are declared null sets."""
        pieces = []
        m = len(self.surfaces)
        for pattern in itertools.product((1.0, -1.0), repeat=m):
            u = np.array(pattern)

            def region(x, t, u=u):
                return all(ui * s.value(x, t) >= 0 for ui, s in zip(u, self.surfaces))

            def fn(x, t, u=u):
                return self.func(x, t, u)

            pieces.append(Piece(region, SmoothField(self.dim_state, fn)))
        null = [lambda x, t, s=s: s.value(x, t) == 0.0 for s in self.surfaces]
        return PiecewiseField(self.dim_state, pieces, null)


@dataclass(frozen=True)
class SelectionRule:
    kind: str
    modal: ModalField | None = None
    select: Callable | None = None
    set_map: Callable | None = None
    needs_set: bool = True

    @classmethod
    def direct(cls) -> "SelectionRule":
        return cls(DIRECT)

    @classmethod
    def sliding(cls, modal: ModalField) -> "SelectionRule":
        return cls(SLIDING, modal=modal)

    @classmethod
    def custom(cls, select, set_map=None, needs_set: bool = True) -> "SelectionRule":
        """``select(x, t, F)``; F is ``set_map(x, t)`` or None when no map is given.

        With ``needs_set=False`` the map is evaluated only to validate the
        recorded velocities and ``select`` receives None.
        """
        return cls(CUSTOM, select=select, set_map=set_map, needs_set=needs_set)


def _rk4(fun, x, t, h):
    k1 = fun(x, t)
    k2 = fun(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = fun(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = fun(x + h * k3, t + h)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _euler(fun, x, t, h):
    return x + h * fun(x, t)


_STEPPERS = {"rk4": _rk4, "euler": _euler}


class _Integrator:
    def __init__(self, f, rule, method, dt, cap, event_tol):
        if method not in _STEPPERS:
            raise ValueError(f"unknown method {method!r}")
        self.f = f
        self.rule = rule
        self.step_fn = _STEPPERS[method]
        self.dt = dt
        self.cap = cap
        self.event_tol = event_tol
        self.modal = rule.modal
        if rule.kind == SLIDING and rule.modal is None:
            raise ValueError("sliding rule needs a ModalField")
        m = len(self.modal.surfaces) if self.modal else 0
        self.sliding: set[int] = set()
        self.side = np.zeros(m)
        self._memo = None
        self._frozen = None  # switch values held fixed over one step

    # -- velocity selection ------------------------------------------------
    def _eval(self, x, t, u):
        return np.asarray(self.modal.func(x, t, u), dtype=float)

    def _normal(self, i, x, t, v) -> float:
        sf = self.modal.surfaces[i]
        if sf.axis is not None:
            return float(v[sf.axis])
        return float(np.dot(sf.gradient(x, t), v))

    def _switch_values(self, x, t, S=None):
        """Switch values u at (x, t).

        Returns (u, ueq, v): ueq are the equivalent controls on the sliding
        surfaces and v the resulting velocity (None when nothing slides).
        """
        S = self.sliding if S is None else S
        if self._frozen is not None:
            u = self._frozen.copy()
        else:
            u = self._signs(x, t)
        if not S:
            if self.modal.split is not None:
                a, B = self.modal.split(x, t)
                return u, _EMPTY, a + B @ u
            return u, _EMPTY, None
        idx = sorted(S)
        u0 = u.copy()
        u0[idx] = 0.0
        if self.modal.split is not None:
            a, B = self.modal.split(x, t)
            base = a + B @ u0
            cols = [B[:, j] for j in idx]
        else:
            base = self._eval(x, t, u0)
            # affine in u: column j of the switch matrix is f(u0 + e_j) - f(u0)
            cols = []
            for j in idx:
                u0[j] = 1.0
                cols.append(self._eval(x, t, u0) - base)
                u0[j] = 0.0
        if len(idx) == 1:
            i = idx[0]
            G = self._normal(i, x, t, cols[0])
            if abs(G) <= 1e-14 * max(1.0, float(np.abs(cols[0]).max())):
                raise DegenerateSlidingError(f"degenerate sliding at x={np.asarray(x).tolist()}, t={t}")
            ueq = np.array([-self._normal(i, x, t, base) / G])
        else:
            G = np.array([[self._normal(i, x, t, b) for b in cols] for i in idx])
            h = np.array([self._normal(i, x, t, base) for i in idx])
            sv = np.linalg.svd(G, compute_uv=False)
            if sv[-1] <= 1e-14 * max(1.0, sv[0]):
                raise DegenerateSlidingError(f"degenerate sliding at x={np.asarray(x).tolist()}, t={t}")
            ueq = np.linalg.solve(G, -h)
        u[idx] = ueq
        # velocity with the switch values clipped to the admissible box
        v = base.copy()
        for c, uj in zip(cols, ueq):
            v += c * min(max(uj, -1.0), 1.0)
        return u, ueq, v

    def _signs(self, x, t):
        surfaces = self.modal.surfaces
        u = np.empty(len(surfaces))
        for i, sf in enumerate(surfaces):
            si = sf.value(x, t)
            u[i] = self.side[i] if si == 0.0 else (1.0 if si > 0 else -1.0)
        return u

    def velocity(self, x, t):
        # the first stage of a step reuses the velocity recorded at its start
        memo = self._memo
        if memo is not None and memo[0] is x and memo[1] == t:
            return memo[2]
        v = self._velocity(x, t)
        self._memo = (x, t, v)
        return v

    def _velocity(self, x, t):
        kind = self.rule.kind
        if kind == DIRECT:
            return self.f(x, t)
        if kind == CUSTOM:
            F = self.rule.set_map(x, t) if self.rule.set_map is not None and self.rule.needs_set else None
            return np.asarray(self.rule.select(x, t, F), dtype=float)
        u, _, v = self._switch_values(x, t)
        return self._eval(x, t, u) if v is None else v

    def check_selection(self, x, t, q):
        if self.rule.kind == CUSTOM and self.rule.set_map is not None:
            F = self.rule.set_map(x, t)
            if not contains(F, q, 1e-6):
                raise SelectionError(f"custom selection {q.tolist()} not in F(x) at t={t}")

    def step(self, x, t, h):
        """One step with the mode of (x, t) held fixed, so that every stage
        uses the same smooth piece and crossings show up at the endpoint."""
        kind = self.rule.kind
        if kind == CUSTOM:
            return self.step_fn(self.velocity, x, t, h)
        if kind == DIRECT:
            fld = piece_field(self.f, self.f.piece_index(x, t))

            def fun(y, s):
                return self.velocity(y, s) if y is x and s == t else fld(y, s)

            return self.step_fn(fun, x, t, h)
        first = self.velocity(x, t)
        self._frozen = self._signs(x, t)
        try:
            return self.step_fn(lambda y, s: first if y is x and s == t else self._velocity(y, s), x, t, h)
        finally:
            self._frozen = None

    # -- discrete state ----------------------------------------------------
    def label(self, x, t):
        if self.rule.kind == SLIDING:
            return self.modal.label(x, t) if self.modal.label is not None else None
        return self.f.label(x, t) if self.f is not None else None

    def surface_signs(self, x, t):
        if self.rule.kind != SLIDING:
            return None
        return np.array([np.sign(sf.value(x, t)) for sf in self.modal.surfaces])

    def crossed(self, xa, ta, xb, tb):
        if self.label(xa, ta) != self.label(xb, tb):
            return True
        if self.rule.kind == DIRECT:
            return self.f.piece_index(xa, ta) != self.f.piece_index(xb, tb)
        if self.rule.kind == SLIDING:
            sa, sb = self.surface_signs(xa, ta), self.surface_signs(xb, tb)
            for i in range(len(sa)):
                if i in self.sliding:
                    continue
                if sa[i] != 0 and sa[i] != sb[i]:
                    return True
        return False

    def project(self, x, t, indices):
        for i in indices:
            sf = self.modal.surfaces[i]
            if sf.axis is not None:
                x = x.copy()
                x[sf.axis] = 0.0
                continue
            g = np.asarray(sf.gradient(x, t), dtype=float)
            x = x - sf.value(x, t) * g / (g @ g)
        return x

    def try_enter(self, x, t, events):
        """Enter sliding on every surface where x sits and the equivalent control is admissible."""
        if self.rule.kind != SLIDING:
            return x
        changed = True
        while changed:
            changed = False
            for i, sf in enumerate(self.modal.surfaces):
                if i in self.sliding:
                    continue
                if abs(sf.value(x, t)) > 0.0:
                    continue
                trial = self.sliding | {i}
                try:
                    _, ueq, _ = self._switch_values(x, t, trial)
                except DegenerateSlidingError:
                    continue
                if np.all(np.abs(ueq) <= 1.0 + 1e-12):
                    self.sliding = trial
                    self._memo = None
                    events.append((t, "slide_enter", i))
                    changed = True
                else:
                    # transversal: leave toward the side the field points to
                    g = np.asarray(sf.gradient(x, t), dtype=float)
                    u, _, _ = self._switch_values(x, t)
                    up, um = u.copy(), u.copy()
                    up[i], um[i] = 1.0, -1.0
                    plus = g @ self.modal(x, t, up)
                    self.side[i] = 1.0 if plus > 0 else -1.0
                    self._memo = None
        return x

    def check_exit(self, x, t, events):
        if not self.sliding:
            return
        _, ueq, _ = self._switch_values(x, t)
        idx = sorted(self.sliding)
        for i, ui in zip(idx, ueq):
            if abs(ui) > 1.0 + 1e-12:
                self.sliding.discard(i)
                self.side[i] = np.sign(ui)
                self._memo = None
                events.append((t, "slide_exit", i))


def integrate(
    f: PiecewiseField | None,
    rule: SelectionRule,
    x0,
    t0: float,
    t_final: float,
    dt: float,
    method: str = "rk4",
    V: LyapunovCandidate | None = None,
    blowup: float = 1e9,
) -> Trajectory:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_final > t0:
        raise ValueError("t_final must exceed t0")
    x = np.asarray(x0, dtype=float).ravel().copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    if f is None and rule.kind == SLIDING:
        f = rule.modal.piecewise()
    it = _Integrator(f, rule, method, dt, blowup, dt * 1e-3)
    events: list = []
    t = float(t0)

    times, states, vels, slid = [], [], [], []

    def record(x, t):
        q = it.velocity(x, t)
        it.check_selection(x, t, q)
        times.append(t)
        states.append(x.copy())
        vels.append(q)
        slid.append(tuple(sorted(it.sliding)))

    def build():
        traj = Trajectory(np.array(times), np.array(states), np.array(vels), events=list(events), sliding=list(slid))
        if V is not None:
            traj.V_values = np.array([V(s, tt) for s, tt in zip(traj.states, traj.times)])
            traj.W_values = np.array([V.W(s) for s in traj.states])
        return traj

    x = it.try_enter(x, t, events)
    record(x, t)
    n_steps = int(np.ceil((t_final - t0) / dt - 1e-9))
    grid_times = t0 + dt * np.arange(1, n_steps + 1)
    grid_times[-1] = t_final
    k = 0
    while k < len(grid_times):
        target = grid_times[k]
        h = target - t
        if h <= 1e-15 * max(1.0, abs(t)):
            k += 1
            continue
        it.check_exit(x, t, events)
        x1 = it.step(x, t, h)
        t1 = target
        if it.crossed(x, t, x1, t1):
            lo, hi = 0.0, h
            while hi - lo > it.event_tol:
                mid = 0.5 * (lo + hi)
                if it.crossed(x, t, it.step(x, t, mid), t + mid):
                    hi = mid
                else:
                    lo = mid
            lab_before = it.label(x, t)
            # step cleanly up to the last uncrossed time, then across in one tiny step
            if lo > 0.0:
                x1 = it.step(it.step(x, t, lo), t + lo, hi - lo)
            else:
                x1 = it.step(x, t, hi)
            t1 = t + hi
            if it.label(x1, t1) != lab_before:
                events.append((t1, "switch", it.label(x1, t1)))
            if it.rule.kind == SLIDING:
                sa, sb = it.surface_signs(x, t), it.surface_signs(x1, t1)
                hit = [i for i in range(len(sa)) if i not in it.sliding and sa[i] != 0 and sa[i] != sb[i]]
                if hit:
                    xp = it.project(x1, t1, hit)
                    before = set(it.sliding)
                    it.try_enter(xp, t1, events)
                    entered = it.sliding - before
                    if entered:
                        x1 = xp
                    for i in hit:
                        if i not in it.sliding:
                            events.append((t1, "switch", f"surface {i}"))
        else:
            k += 1
        if it.sliding:
            x1 = it.project(x1, t1, sorted(it.sliding))
        if not float(x1 @ x1) <= it.cap ** 2:  # also catches nan
            raise FiniteEscapeError(f"finite escape suspected near t={t1:.6g}", build())
        x, t = x1, t1
        if it.rule.kind == SLIDING:
            x = it.try_enter(x, t, events)
        record(x, t)
    return build()


@dataclass(frozen=True)
class MonitorReport:
    nonincreasing: bool
    max_uptick: float
    W_integral: float
    W_tail: float
    V_initial: float


def monitor(traj: Trajectory, V: LyapunovCandidate, tol_up: float | None = None) -> MonitorReport:
    """Check V along the run and integrate W, the quantities that the
    non-strict Lyapunov argument controls."""
    if traj.states.shape[1] != V.dim_state:
        raise ValueError("trajectory and candidate dimensions disagree")
    Vs = np.array([V(s, t) for s, t in zip(traj.states, traj.times)])
    Ws = np.array([V.W(s) for s in traj.states])
    dt = float(np.max(np.diff(traj.times))) if len(traj) > 1 else 0.0
    if tol_up is None:
        tol_up = 1e-6 + 10 * dt ** 2
    up = float(np.max(np.diff(Vs))) if len(Vs) > 1 else 0.0
    up = max(up, 0.0)
    integral = float(np.trapezoid(Ws, traj.times)) if len(Vs) > 1 else 0.0
    t_end, t_start = traj.times[-1], traj.times[0]
    tail = traj.times >= t_end - 0.1 * (t_end - t_start)
    return MonitorReport(up <= tol_up, up, integral, float(Ws[tail].max()), float(Vs[0]))
