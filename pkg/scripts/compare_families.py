#!/usr/bin/env python3
"""Plot consumption curves of the benchmark families side by side.

Produces a PNG comparing classical, open-loop and feedback consumption
fractions for log utility under a linearly increasing discount rate, plus
the naive pre-commitment rule of the time-0 agent.

Example:
    python3 scripts/compare_families.py --out comparison.png
"""

import argparse

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import mertoneq as mq
from mertoneq import compare


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="comparison.png")
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--delta-base", type=float, default=0.1)
    ap.add_argument("--delta-slope", type=float, default=0.1)
    args = ap.parse_args()

    grid = mq.TimeGrid(1.0, args.steps)
    market = mq.MarketModel(grid, 0.05, [0.08], [[0.2]])

    def delta(tau):
        return args.delta_base + args.delta_slope * np.asarray(tau, dtype=float)

    discount = mq.KarpRate(delta, grid.horizon)
    u = mq.LogUtility(1.0)

    families = {
        "classical (constant rate)": compare.classical_merton(market, u, args.delta_base),
        "open-loop equilibrium": compare.karp_openloop(market, u, delta),
        "feedback equilibrium": compare.solano_feedback_log(market, 1.0, delta),
        "naive (time-0 plan)": compare.naive_log_consumption(discount, 1.0, 0.0),
    }

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, pol in families.items():
        curve = [float(np.asarray(pol.consumption(t, 1.0))) for t in grid.nodes]
        ax.plot(grid.nodes, curve, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("consumption fraction of wealth")
    ax.set_title(f"delta(l) = {args.delta_base} + {args.delta_slope} l")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
