"""Sensitivity to initial data: twin runs from X0 and a delta perturbation.

Twenty particles in the unit disk; for each delta prints the largest
separation of the twin trajectories and the fitted growth rate.

    python scripts/stability_study.py --deltas 1e-8,1e-6,1e-4
"""

import argparse

from confinedflow import diagnostics as diag
from confinedflow.dynamics import IntegratorConfig
from confinedflow.scenarios import stability_benchmark


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--deltas", default="1e-8,1e-6,1e-4")
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--T", type=float, default=10.0)
    args = p.parse_args()

    b = stability_benchmark()
    cfg = IntegratorConfig(dt=args.dt)
    for delta in (float(d) for d in args.deltas.split(",")):
        r = diag.stability_check(b.domain, b.model, b.X0, delta, cfg, args.T)
        print(f"delta={delta:8.1e}  max distance={r.extra['max_distance']:.3e} "
              f"({r.extra['max_distance'] / delta:6.2f} delta)  rate={r.extra['rate']:.4f}  "
              f"{'pass' if r.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
