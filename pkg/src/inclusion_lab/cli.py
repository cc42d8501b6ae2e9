"""Command-line front end.

Exit codes: 0 success, 1 the analysis answered "no", 2 usage or tool error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import repro as repro_mod
from .fields import assumption_probe, containment_check
from .lyap import MODES, UPPER, certify, parse_grid, rectangular_grid
from .scenarios import SCENARIOS, UnknownScenarioError, resolve_name, scenario
from .sim import FiniteEscapeError, Trajectory, integrate, monitor

log = logging.getLogger("inclusion_lab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# flags whose values may start with '-' (e.g. a grid "-2:2:21")
_VALUE_FLAGS = ("--grid", "--point", "--times", "--deltas")


class UsageError(Exception):
    pass


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_csv(path, traj: Trajectory) -> None:
    n = traj.states.shape[1]
    by_time: dict = {}
    for te, kind, _ in traj.events:
        by_time.setdefault(float(te), []).append(kind)
    V = traj.V_values if traj.V_values is not None else np.full(len(traj), np.nan)
    W = traj.W_values if traj.W_values is not None else np.full(len(traj), np.nan)
    lines = [",".join(["t", *[f"x{i + 1}" for i in range(n)], "V", "W", "event"])]
    for k in range(len(traj)):
        row = [_fmt(traj.times[k]), *(_fmt(v) for v in traj.states[k]), _fmt(V[k]), _fmt(W[k])]
        row.append("|".join(by_time.get(float(traj.times[k]), [])))
        lines.append(",".join(row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)} (unique prefixes accepted)")
    common.add_argument("--config", help="YAML file with flag values and a 'params' mapping")
    common.add_argument("--out", help="output path (CSV for simulate, JSON summary otherwise)")
    common.add_argument("--dt", type=float)
    common.add_argument("--tfinal", type=float)
    common.add_argument("--method", choices=("rk4", "euler"))
    common.add_argument("--grid", help='per-axis "lo:hi:n", comma separated')
    common.add_argument("--times", help="comma-separated times for certify grids")
    common.add_argument("--point", help="comma-separated state for contain/probe")
    common.add_argument("--delta", type=float)
    common.add_argument("--deltas", help="comma-separated decreasing radii for probe")
    common.add_argument("--samples", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--seed", type=int)
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="scenario parameter override (value parsed as YAML)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="inclusion-lab", description="Switched nonsmooth systems toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate a scenario and write a CSV")
    sub.add_parser("certify", parents=[common], help="grid-check the Lyapunov decrease condition")
    sub.add_parser("contain", parents=[common], help="check the switched set against the subsystem hull")
    sub.add_parser("probe", parents=[common], help="probe local finiteness of the switching signal")
    rp = sub.add_parser("repro", parents=[common], help="reproduce a built-in scenario's findings")
    rp.add_argument("name", nargs="?", default="all", help="scenario name, prefix, or 'all'")
    return p


def _normalize_argv(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def _load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise UsageError(f"malformed config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a mapping")
    params = dict(cfg.pop("params", {}) or {})
    for item in args.param:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        params[key.strip()] = yaml.safe_load(val)
    for key, val in vars(args).items():  # flags win over the file
        if key in ("config", "param", "command", "verbose"):
            continue
        if val is not None:
            cfg[key] = val
    cfg["params"] = params
    return cfg


def _positive(cfg, key):
    v = cfg.get(key)
    if v is not None and not v > 0:
        raise UsageError(f"--{key} must be positive")
    return v


def _scenario(cfg):
    name = cfg.get("scenario")
    if not name:
        raise UsageError("--scenario is required")
    try:
        return scenario(name, **cfg["params"])
    except UnknownScenarioError as exc:
        raise UsageError(exc.args[0]) from exc
    except TypeError as exc:
        raise UsageError(f"bad scenario parameters: {exc}") from exc


def _setting(cfg, sc, key, fallback):
    if cfg.get(key) is not None:
        return cfg[key]
    return sc.defaults.get(key, fallback)


def _point(cfg, sc):
    if cfg.get("point") is None:
        return np.asarray(sc.point, dtype=float)
    x = np.array(_floats(cfg["point"]))
    if x.size != sc.dim_state:
        raise UsageError(f"--point needs {sc.dim_state} entries")
    return x


def cmd_simulate(cfg) -> tuple[int, dict]:
    sc = _scenario(cfg)
    dt = _positive(cfg, "dt") or sc.defaults.get("dt", 1e-3)
    tfinal = _positive(cfg, "tfinal") or sc.defaults.get("tfinal", 1.0)
    method = cfg.get("method") or "rk4"
    code = EXIT_OK
    try:
        traj = integrate(sc.field, sc.rule, sc.x0, 0.0, tfinal, dt, method, V=sc.V)
        verdicts = []
    except FiniteEscapeError as exc:
        traj = exc.trajectory
        code = EXIT_FAIL
        verdicts = [dict(check="integration", passed=False, detail=str(exc))]
    mon = monitor(traj, sc.V)
    verdicts += [
        dict(check="V non-increasing", passed=mon.nonincreasing, detail=f"max uptick {mon.max_uptick:.3g}"),
        dict(check="integral of W <= V(initial)", passed=mon.W_integral <= mon.V_initial + 1e-3,
             detail=f"{mon.W_integral:.6g} vs {mon.V_initial:.6g}"),
    ]
    if cfg.get("out"):
        write_csv(cfg["out"], traj)
    summary = dict(scenario=sc.name, params=dict(sc.params, dt=dt, tfinal=tfinal, method=method), verdicts=verdicts,
                   worst_margin=None, final_state=traj.states[-1].tolist(), W_tail=mon.W_tail, events=len(traj.events))
    return code, summary


def cmd_certify(cfg) -> tuple[int, dict]:
    sc = _scenario(cfg)
    if not sc.set_maps:
        raise UsageError(f"scenario {sc.name} has no Lyapunov certificate to check")
    mode = cfg.get("mode") or sc.defaults.get("mode", UPPER)
    tol = _setting(cfg, sc, "tol", 1e-9)
    try:
        axes = parse_grid(_setting(cfg, sc, "grid", None) or "")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if len(axes) != sc.dim_state:
        raise UsageError(f"grid has {len(axes)} axes, scenario state has {sc.dim_state}")
    times = _floats(cfg["times"]) if cfg.get("times") else sc.defaults.get("times", [0.0])
    rep = certify(sc.V, sc.set_maps, rectangular_grid(axes, times), mode=mode, tol=tol, V_family=sc.V_family)
    verdicts = [dict(check=f"subsystem {k}", passed=rep.failures[k] == 0,
                     detail=f"{rep.passes[k]} pass, {rep.failures[k]} fail") for k in rep.passes]
    worst_union = max((v for *_, v in rep.union_failures), default=None)
    verdicts.append(dict(check="union hull", passed=rep.union_pass,
                         detail=f"{rep.union_passes} pass, {len(rep.union_failures)} fail"
                         + (f", largest violation {worst_union:.6g}" if worst_union is not None else "")))
    summary = dict(scenario=sc.name, params=dict(sc.params, mode=mode, tol=tol, grid=[list(a) for a in axes],
                                                  times=list(times)),
                   verdicts=verdicts, worst_margin=rep.worst_margin, note=rep.note,
                   worst_location=rep.worst_location)
    return (EXIT_OK if rep.passed else EXIT_FAIL), summary


def cmd_contain(cfg) -> tuple[int, dict]:
    sc = _scenario(cfg)
    x = _point(cfg, sc)
    delta = _positive(cfg, "delta") or sc.defaults.get("delta", 1e-3)
    samples = cfg.get("samples") or sc.defaults.get("samples", 500)
    if samples < 1:
        raise UsageError("--samples must be at least 1")
    tol = _setting(cfg, sc, "tol", 1e-9)
    seed = cfg.get("seed") or 0
    rep = containment_check(sc.subfields, sc.rho, x, 0.0, delta, samples, tol, seed=seed)
    verdicts = [dict(check="switched set inside hull of subsystem sets", passed=rep.holds,
                     detail=f"inflation needed {rep.inflation_needed:.6g}; indices {list(rep.indices)[:20]}")]
    summary = dict(scenario=sc.name, params=dict(sc.params, point=x.tolist(), delta=delta, samples=samples,
                                                  tol=tol, seed=seed),
                   verdicts=verdicts, worst_margin=-rep.inflation_needed)
    return (EXIT_OK if rep.holds else EXIT_FAIL), summary


def cmd_probe(cfg) -> tuple[int, dict]:
    sc = _scenario(cfg)
    x = _point(cfg, sc)
    if cfg.get("deltas"):
        deltas = _floats(cfg["deltas"])
    elif cfg.get("delta"):
        deltas = [cfg["delta"] * 10.0 ** -k for k in range(6)]
    else:
        deltas = sc.defaults.get("deltas", [10.0 ** -k for k in range(1, 7)])
    samples = cfg.get("samples") or 200
    seed = cfg.get("seed") or 0
    try:
        rep = assumption_probe(sc.rho, x, 0.0, deltas, samples, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    verdicts = [dict(check="locally finite switching", passed=rep.finite_at is not None,
                     detail=f"counts {list(rep.counts)}, with 16x samples {list(rep.refined_counts)}; {rep.note}")]
    summary = dict(scenario=sc.name, params=dict(sc.params, point=x.tolist(), deltas=list(deltas), samples=samples,
                                                  seed=seed),
                   verdicts=verdicts, worst_margin=None, finite_at=rep.finite_at)
    return (EXIT_OK if rep.finite_at is not None else EXIT_FAIL), summary


def cmd_repro(cfg, name: str) -> tuple[int, dict]:
    names = list(repro_mod.REPROS) if name == "all" else [resolve_name(name)]
    verdicts = []
    for nm in names:
        fn = repro_mod.REPROS[nm]
        kw = {}
        if nm.startswith("sec8"):
            kw = dict(dt=cfg.get("dt") or 1e-3, tfinal=cfg.get("tfinal") or 20.0, grid=cfg.get("grid"))
        elif nm.startswith("sec7"):
            kw = dict(grid=cfg.get("grid"))
        elif nm.startswith("sec4"):
            kw = dict(seed=cfg.get("seed") or 0)
        for v in fn(**kw):
            print(v.line())
            verdicts.append(v.as_dict())
    ok = all(v["passed"] for v in verdicts)
    print(f"{sum(v['passed'] for v in verdicts)}/{len(verdicts)} expected outcomes observed")
    return (EXIT_OK if ok else EXIT_FAIL), dict(scenario=name, params={}, verdicts=verdicts, worst_margin=None)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_normalize_argv(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    start = time.perf_counter()
    try:
        cfg = _load_config(args)
        if args.command == "repro":
            code, summary = cmd_repro(cfg, args.name)
        else:
            code, summary = {"simulate": cmd_simulate, "certify": cmd_certify, "contain": cmd_contain,
                             "probe": cmd_probe}[args.command](cfg)
        summary["runtime_s"] = round(time.perf_counter() - start, 6)
        text = json.dumps(summary, default=_json_default)
        if args.command != "repro":
            print(text)
        out = cfg.get("out")
        if out and args.command != "simulate":
            Path(out).write_text(text + "\n")
        return code
    except (UsageError, UnknownScenarioError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # tool failure, not an analysis verdict
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
