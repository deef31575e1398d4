#!/usr/bin/env python3
"""Solve an equilibrium policy and certify it end to end.

Example:
    python3 scripts/run_verification.py --utility log --paths 20000
    python3 scripts/run_verification.py --utility power --corrupt 2.0
"""

import argparse
import time

import mertoneq as mq
from mertoneq.simulate import ScaledConsumptionPolicy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--utility", choices=["power", "log", "exponential"], default="log")
    ap.add_argument("--steps", type=int, default=100, help="time grid steps")
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--x0", type=float, default=1.0)
    ap.add_argument("--corrupt", type=float, default=1.0,
                    help="scale consumption by this factor before verifying")
    args = ap.parse_args()

    grid = mq.TimeGrid(1.0, args.steps)
    market = mq.MarketModel(grid, 0.05, [0.08], [[0.2]])
    discount = mq.Hyperbolic(1.0, 1.0, grid.horizon)
    utility = {
        "power": mq.PowerUtility(1.0, 0.5),
        "log": mq.LogUtility(1.0),
        "exponential": mq.ExponentialUtility(1.0, 1.0),
    }[args.utility]

    policy = mq.solve_policy(market, discount, utility)
    if args.corrupt != 1.0:
        policy = ScaledConsumptionPolicy(policy, args.corrupt)

    t0 = time.time()
    report = mq.verify_equilibrium(policy, market, discount, utility,
                                   args.x0, args.paths, args.seed)
    print(f"verdict: {report.verdict}  ({time.time() - t0:.1f}s)")
    for row in report.residuals:
        print(f"  t={row.t:.3f} x={row.x:.4f}  R_c={row.r_c:.2e}  R_I={row.r_i:.2e}")
    for note in report.notes:
        print(f"  note: {note}")
    extrap = [r for r in report.spikes if r.epsilon == 0.0]
    worst = max(extrap, key=lambda r: r.delta / r.stderr if r.stderr > 0 else 0.0)
    print(f"  worst spike direction: t={worst.t:.3f} v_index={worst.v_index} "
          f"delta={worst.delta:.3e} stderr={worst.stderr:.3e}")


if __name__ == "__main__":
    main()
