"""Reproduction drivers for the built-in scenarios.

Each driver returns a list of :class:`Verdict`; ``passed`` means the
expected outcome was observed (for counterexamples the expected outcome
is a failure of the naive check).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import assumption_probe, containment_check, filippov_estimate, krasovskii_estimate
from .hull import Polytope, hausdorff
from .lyap import LOWER, UPPER, certify, gen_deriv_reduced, parse_grid, rectangular_grid
from .scenarios import scenario
from .sim import integrate, monitor


@dataclass(frozen=True)
class Verdict:
    scenario: str
    check: str
    passed: bool
    detail: str

    def line(self) -> str:
        mark = "observed" if self.passed else "NOT observed"
        return f"[{self.scenario}] {self.check}: {mark} ({self.detail})"

    def as_dict(self) -> dict:
        return dict(scenario=self.scenario, check=self.check, passed=self.passed, detail=self.detail)


def repro_sec4(seed: int = 0, delta: float = 1e-3, samples: int = 500) -> list[Verdict]:
    sc = scenario("sec4_example")
    name = sc.name
    x = np.zeros(1)
    out = []
    K = krasovskii_estimate(sc.field, x, 0.0, delta, samples, seed)
    d = hausdorff(K, Polytope(np.array([[0.0], [1.0]])))
    out.append(Verdict(name, "Krasovskii set at 0 is [0, 1]", d <= 0.05, f"Hausdorff distance {d:.3g}"))
    F = filippov_estimate(sc.field, x, 0.0, delta, samples, seed)
    ok = len(F) == 1 and F.vertices[0, 0] == 1.0
    out.append(Verdict(name, "Filippov set at 0 is {1}", ok, f"vertices {F.vertices.ravel().tolist()}"))
    subs = [krasovskii_estimate(sc.subfields(s), x, 0.0, delta, samples, seed) for s in range(1, 10)]
    ok = all(len(P) == 1 and P.vertices[0, 0] == 0.0 for P in subs)
    out.append(Verdict(name, "each subsystem set at 0 is {0}", ok, "indices 1..9 at the sampling radius"))
    rep = containment_check(sc.subfields, sc.rho, x, 0.0, delta, samples, seed=seed)
    ok = (not rep.holds) and 0.9 <= rep.inflation_needed <= 1.1
    out.append(Verdict(name, "switched set escapes the hull of subsystem sets", ok,
                       f"inflation needed {rep.inflation_needed:.3g}, {len(rep.indices)} indices attained"))
    probe = assumption_probe(sc.rho, x, 0.0, sc.defaults["deltas"], 200, seed)
    out.append(Verdict(name, "switching is not locally finite at 0", probe.finite_at is None,
                       f"index counts {list(probe.counts)} -> {list(probe.refined_counts)} with 16x samples"))
    return out


def repro_sec7(grid: str | None = None, dt: float = 1e-3) -> list[Verdict]:
    sc = scenario("sec7_counterexample")
    name = sc.name
    pts = rectangular_grid(parse_grid(grid or sc.defaults["grid"]))
    rep = certify(sc.V, sc.set_maps, pts, mode=LOWER, tol=1e-9)
    out = [Verdict(name, "each subsystem satisfies the min-max decrease", rep.subsystems_pass,
                   f"passes {rep.passes}, failures {rep.failures}")]
    surface = {k for k, (x, _) in enumerate(pts) if abs(x[0]) == abs(x[1]) and np.any(x != 0)}
    failed = {k for k, *_ in rep.union_failures}
    err = max((abs(v - 0.5 * sc.V(np.array(x))) for _, x, _, v in rep.union_failures), default=0.0)
    ok = failed == surface and err <= 1e-9
    out.append(Verdict(name, "union hull violates it exactly on |x1| = |x2|, by V/2", ok,
                       f"{len(failed)} failing points of {len(surface)} on the surface, max error {err:.2g}"))
    red = float(gen_deriv_reduced(sc.V, sc.V_family, sc.set_maps[1](np.ones(2), 0.0), np.ones(2), 0.0))
    out.append(Verdict(name, "reduced derivative at [1, 1] equals -V", abs(red + 1.0) <= 1e-9, f"value {red:.12g}"))
    tr = integrate(sc.field, sc.rule, sc.x0, 0.0, 1.0, dt, V=sc.V)
    err = float(np.linalg.norm(tr.states[-1] - np.exp(0.5) * np.ones(2)))
    mon = monitor(tr, sc.V)
    ok = err <= 1e-3 * np.exp(0.5) and not mon.nonincreasing
    out.append(Verdict(name, "selection q = x/2 grows as exp(t/2)", ok,
                       f"|x(1) - e^0.5 [1;1]| = {err:.2g}, V(1) = {tr.V_values[-1]:.6f}"))
    printed = scenario("sec7_counterexample", variant="printed")
    rep2 = certify(printed.V, printed.set_maps, pts, mode=LOWER, tol=1e-9, union=False)
    out.append(Verdict(name, "printed variant: second subsystem fails on its own off the surface",
                       rep2.failures[2] > 0, f"failures {rep2.failures}"))
    return out


def _adaptive(name: str, dt: float, tfinal: float, grid: str | None) -> list[Verdict]:
    sc = scenario(name)
    tr = integrate(None, sc.rule, sc.x0, 0.0, tfinal, dt, V=sc.V)
    mon = monitor(tr, sc.V)
    n = sc.x_dims
    xT = float(np.linalg.norm(tr.states[-1, :n]))
    out = [
        Verdict(name, "V is non-increasing along the run", mon.nonincreasing and mon.max_uptick <= 1e-4,
                f"max uptick {mon.max_uptick:.2g}"),
        Verdict(name, "integral of W is bounded by V(initial)", mon.W_integral <= mon.V_initial + 1e-3,
                f"{mon.W_integral:.6g} <= {mon.V_initial:.6g}"),
        Verdict(name, "state converges", xT <= 1e-2, f"|x({tfinal:g})| = {xT:.3g}"),
    ]
    pts = rectangular_grid(parse_grid(grid or sc.defaults["grid"]), sc.defaults.get("times", (0.0, 0.7, 2.1)))
    rep = certify(sc.V, sc.set_maps, pts, mode=UPPER, tol=1e-9)
    out.append(Verdict(name, "max-max derivative bounded by -W on the grid", rep.passed,
                       f"{rep.n_points} points, worst margin {rep.worst_margin + 0.0:.3g}"))
    return out


def repro_sec8_example1(dt: float = 1e-3, tfinal: float = 20.0, grid: str | None = None) -> list[Verdict]:
    return _adaptive("sec8_example1", dt, tfinal, grid)


def repro_sec8_example2(dt: float = 1e-3, tfinal: float = 20.0, grid: str | None = None) -> list[Verdict]:
    return _adaptive("sec8_example2", dt, tfinal, grid)


REPROS = {
    "sec4_example": repro_sec4,
    "sec7_counterexample": repro_sec7,
    "sec8_example1": repro_sec8_example1,
    "sec8_example2": repro_sec8_example2,
}
