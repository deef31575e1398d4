#!/usr/bin/env python3
"""Grid-refinement study of the surface solver against the separable oracle.

Prints a table of interior relative errors and observed convergence orders
for a sequence of (time x space) grids.

Example:
    python3 scripts/pde_convergence.py --utility power --levels 4
"""

import argparse
import time

import numpy as np

import mertoneq as mq
from mertoneq.pde import solve_theta


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--utility", choices=["power", "log"], default="power")
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--base", type=int, default=50, help="coarsest grid size")
    args = ap.parse_args()

    discount = mq.Hyperbolic(1.0, 1.0, 1.0)
    utility = mq.PowerUtility(1.0, 0.5) if args.utility == "power" else mq.LogUtility(1.0)

    print(f"{'grid':>10} {'error':>12} {'order':>7} {'time':>7}")
    prev = None
    for level in range(args.levels):
        n = args.base * 2**level
        grid = mq.TimeGrid(1.0, n)
        market = mq.MarketModel(grid, 0.05, [0.08], [[0.2]])
        ref = mq.solve_policy(market, discount, utility)
        t0 = time.time()
        s = solve_theta(market, discount, utility, 0.1, 10.0, n)
        elapsed = time.time() - t0
        exact = np.array([[float(ref.theta(t, x)) for x in s.x] for t in s.times])
        err = float((np.abs(s.theta - exact) / np.abs(exact))[:, 1:-1].max())
        order = f"{np.log2(prev / err):.2f}" if prev else "-"
        print(f"{n:>5}x{n:<4} {err:>12.3e} {order:>7} {elapsed:>6.1f}s")
        prev = err


if __name__ == "__main__":
    main()
