"""Disk experiments: crowding at the wall and layer ordering.

Runs circle_case1 and circle_case2 (desk scale unless --paper), prints the
diagnostics, a radial histogram of the final state, and writes SVG snapshots
at a few times.

    python scripts/reproduce_circle.py --out runs/circle
"""

import argparse
from pathlib import Path

import numpy as np

from confinedflow.scenarios import get_builtin, render_frame, run_scenario


def radial_histogram(X, bins=5):
    r = np.linalg.norm(X, axis=1)
    counts, edges = np.histogram(r, bins=bins, range=(0.0, 1.0))
    # number density per annulus relative to a uniform spread
    area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    density = counts / area / (len(X) / np.pi)
    return edges, counts, density


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/circle")
    p.add_argument("--paper", action="store_true", help="n = 3000, T = 3000 (hours)")
    p.add_argument("--seed", type=int, default=None)
    args = p.parse_args()

    for name in ("circle_case1", "circle_case2"):
        cfg = get_builtin(name, desk=not args.paper)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = Path(args.out) / name
        traj = run_scenario(cfg, out_dir=out)
        print(f"== {name} ({cfg.scale}, n={cfg.n}, T={cfg.T:g})")
        for r in traj.diagnostics["reports"]:
            print("  " + r.line())
        for k, v in traj.diagnostics["info"].items():
            print(f"  info {k} = {v:.4g}")
        edges, counts, density = radial_histogram(traj.positions[-1])
        print("  radial density (1 = uniform):")
        for lo, hi, c, d in zip(edges[:-1], edges[1:], counts, density):
            print(f"    {lo:.1f}-{hi:.1f}: {c:4d} particles  {d:5.2f}")
        for frac in (0.0, 0.1, 0.5, 1.0):
            m = int(round(frac * (traj.n_frames - 1)))
            render_frame(traj, m, out / f"snapshot_t{traj.times[m]:g}.svg")
        print(f"  wrote {out}")


if __name__ == "__main__":
    main()
