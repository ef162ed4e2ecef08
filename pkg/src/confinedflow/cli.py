"""Command-line interface: ``confinedflow {list,run,check,converge,render}``.

Every verb that runs diagnostics exits 0 iff all enabled checks pass, 1 if
any fails, and 2 on usage or input errors.  Run directories default to
``$CONFINEDFLOW_OUTPUT/<scenario name>`` (``./runs`` when unset).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import diagnostics as diag
from . import scenarios as sc
from .energy import model_from_spec
from .geometry import domain_from_spec


def _resolve_config(target: str, desk: bool) -> sc.ScenarioConfig:
    path = Path(target)
    if path.is_file():
        return sc.load_config(path)
    return sc.get_builtin(target, desk=desk)


def cmd_list(args) -> int:
    for cfg in sc.builtin_scenarios():
        flag = "  [long-running]" if cfg.long_running else ""
        print(f"{cfg.name:20s} {cfg.scale:5s} n={cfg.n:<5d} dt={cfg.integrator['dt']:<5g} "
              f"T={cfg.T:<6g} {cfg.description}{flag}")
    return 0


def cmd_run(args) -> int:
    cfg = _resolve_config(args.target, args.desk)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out) if args.out else sc.default_output_root() / (
        cfg.name if cfg.scale == "paper" or Path(args.target).is_file() else f"{cfg.name}_desk")
    traj = sc.run_scenario(cfg, out_dir=out)
    reports = traj.diagnostics["reports"]
    for r in reports:
        print(r.line())
    for k, v in traj.diagnostics["info"].items():
        print(f"[INFO] {k} = {v:.6g}")
    print(f"wrote {out}")
    if traj.error:
        print(f"run aborted: {traj.error}", file=sys.stderr)
        return 1
    return 0 if diag.all_passed(reports) else 1


def cmd_check(args) -> int:
    src = Path(args.trajectory)
    traj = sc.read_trajectory(src)
    domain = domain_from_spec(traj.meta["domain"])
    model = model_from_spec(traj.meta["potential"])
    reports = diag.run_suite(traj, domain, model)
    for r in reports:
        print(r.line())
    sc.write_reports(reports, src if src.is_dir() else src.parent)
    if traj.error:
        print(f"trajectory ends in an aborted run: {traj.error}", file=sys.stderr)
        return 1
    return 0 if diag.all_passed(reports) else 1


def cmd_converge(args) -> int:
    bench = sc.BENCHMARKS[args.benchmark]()
    ks = [float(k) for k in args.ks.split(",") if k.strip()]
    if not ks:
        raise ValueError("--ks needs at least one value")
    rows = diag.penalty_convergence_study(bench.domain, bench.model, bench.X0, ks, bench.T,
                                          dt_factor=args.dt_factor)
    print(f"{'k':>10s} {'dt':>12s} {'sup_distance':>14s}")
    for r in rows:
        print(f"{r.k:10g} {r.dt:12.4g} {r.sup_distance:14.6e}")
    d = [r.sup_distance for r in rows]
    decreasing = all(b < a for a, b in zip(d, d[1:]))
    ok = decreasing
    print(f"strictly_decreasing = {str(decreasing).lower()}")
    if len(rows) >= 2:
        order = diag.fitted_order(rows)
        in_range = abs(order - 1.0) <= 0.3
        print(f"fitted_order = {order:.4f} (expected 1.0 +/- 0.3)")
        ok = ok and in_range
    if args.json:
        Path(args.json).write_text(json.dumps([r.__dict__ for r in rows], indent=2) + "\n")
    return 0 if ok else 1


def cmd_render(args) -> int:
    traj = sc.read_trajectory(args.trajectory)
    m = args.frame if args.frame >= 0 else traj.n_frames + args.frame
    if not 0 <= m < traj.n_frames:
        raise IndexError(f"frame {args.frame} out of range (0..{traj.n_frames - 1})")
    src = Path(args.trajectory)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent) / f"frame_{m:05d}.svg"
    sc.render_frame(traj, m, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="confinedflow",
                                description="Interacting particles confined to a planar domain.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    sub.add_parser("list", help="print the builtin scenarios").set_defaults(func=cmd_list)

    r = sub.add_parser("run", help="run a scenario (config file or builtin name)")
    r.add_argument("target")
    r.add_argument("--out", help="run directory (default: $CONFINEDFLOW_OUTPUT/<name>)")
    r.add_argument("--seed", type=int)
    r.add_argument("--desk", action="store_true", help="use the desk-scale builtin variant")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="run the diagnostics suite on a run directory")
    c.add_argument("trajectory")
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("converge", help="penalty-to-projected convergence study")
    v.add_argument("benchmark", choices=sorted(sc.BENCHMARKS))
    v.add_argument("--ks", default="10,100,1000")
    v.add_argument("--dt-factor", type=float, default=0.1, help="penalty dt = factor / k")
    v.add_argument("--json", help="also write the table as JSON")
    v.set_defaults(func=cmd_converge)

    d = sub.add_parser("render", help="write one frame as SVG")
    d.add_argument("trajectory")
    d.add_argument("--frame", type=int, default=-1)
    d.add_argument("--out")
    d.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KeyError, ValueError, IndexError, FileNotFoundError, sc.SamplingError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
