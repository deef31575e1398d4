"""CSV exchange formats: the only artifact format the package emits.

All writers produce deterministic byte streams for identical inputs
(floats rendered with shortest round-trip repr, Unix newlines).
"""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_curve(path: str, times: np.ndarray, values: np.ndarray) -> None:
    write_rows(path, ["t", "value"], zip(times, values))


def write_policy_slice(path: str, policy, times: np.ndarray, xs: Sequence[float]) -> None:
    """Rows t,x,c_hat,u1..ud for the tensor of times and wealth levels."""
    d = np.asarray(policy.investment(float(times[0]), float(xs[0])), dtype=float).shape[-1]
    header = ["t", "x", "c_hat"] + [f"u{i + 1}" for i in range(d)]
    rows = []
    for t in times:
        for x in xs:
            c = float(np.asarray(policy.consumption(float(t), float(x))))
            u = np.asarray(policy.investment(float(t), float(x)), dtype=float).reshape(d)
            rows.append([float(t), float(x), c] + [float(v) for v in u])
    write_rows(path, header, rows)


def write_surface(path: str, surface) -> None:
    theta_x = surface.theta_x
    rows = []
    for i, t in enumerate(surface.times):
        for j, x in enumerate(surface.x):
            rows.append([float(t), float(x), float(surface.theta[i, j]), float(theta_x[i, j])])
    write_rows(path, ["t", "x", "theta", "theta_x"], rows)


def write_paths(path: str, paths) -> None:
    times = paths.times
    d = paths.investment.shape[-1]
    header = ["path_id", "t", "X", "c"] + [f"u{i + 1}" for i in range(d)]
    rows = []
    for p in range(paths.n_paths):
        for k, t in enumerate(times):
            rows.append(
                [p, float(t), float(paths.X[p, k]), float(paths.consumption[p, k])]
                + [float(v) for v in paths.investment[p, k]]
            )
    write_rows(path, header, rows)


def write_estimate(path: str, estimate) -> None:
    write_rows(
        path, ["mean", "stderr", "n_paths", "flagged"],
        [[estimate.mean, estimate.stderr, estimate.n_paths, estimate.n_flagged]],
    )


def write_residuals(path: str, rows) -> None:
    write_rows(
        path, ["t", "x", "R_c", "R_I", "stderr_c", "stderr_I"],
        [[r.t, r.x, r.r_c, r.r_i, r.stderr_c, r.stderr_i] for r in rows],
    )


def write_spikes(path: str, rows) -> None:
    write_rows(
        path, ["t", "v_index", "epsilon", "delta", "stderr"],
        [[r.t, r.v_index, r.epsilon, r.delta, r.stderr] for r in rows],
    )


def write_divergence(path: str, rows) -> None:
    write_rows(path, ["t", "family_a", "family_b", "consumption_gap"], rows)
