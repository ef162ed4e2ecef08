"""Penalty trajectories against the projected reference on the constant-force benchmark.

One particle starts at (0.9, 0) in the unit disk under the force (0.5, 0).
For each stiffness k the penalty run (explicit Euler, dt = 0.1 / k) is
compared with projected RK4 on the same time grid.  Also prints the
penetration depth against max|F| / k and the largest frame speed against
2 max|F|.

    python scripts/penalty_convergence.py --ks 10,100,1000,10000
"""

import argparse

import numpy as np

from confinedflow import diagnostics as diag
from confinedflow.dynamics import IntegratorConfig, simulate
from confinedflow.geometry import exterior_distance
from confinedflow.scenarios import constant_force_benchmark


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ks", default="10,100,1000,10000")
    args = p.parse_args()
    ks = [float(k) for k in args.ks.split(",")]

    b = constant_force_benchmark()
    rows = diag.penalty_convergence_study(b.domain, b.model, b.X0, ks, b.T)
    print(f"{'k':>8s} {'sup dist':>11s} {'depth':>11s} {'|F|/k':>11s} {'speed':>8s} {'2|F|':>6s}")
    for row in rows:
        traj = simulate(b.domain, b.model, b.X0,
                        IntegratorConfig("penalty_euler", row.dt, penalty_k=row.k), b.T)
        depth = max(exterior_distance(b.domain, X).max() for X in traj.positions)
        v = np.linalg.norm(np.diff(traj.positions, axis=0), axis=2) / np.diff(traj.times)[:, None]
        F = traj.max_force_norm
        print(f"{row.k:8g} {row.sup_distance:11.4e} {depth:11.4e} {F / row.k:11.4e} "
              f"{v.max():8.4f} {2 * F:6.3f}")
    if len(rows) > 1:
        print(f"fitted order in k: {diag.fitted_order(rows):.3f}")


if __name__ == "__main__":
    main()
