"""Command-line entry point.

Subcommands: solve | simulate | verify | compare.  Every run resolves a
JSON config, performs the computation, writes CSV artifacts plus a
manifest (resolved config + sha256 of every output) into the output
directory, and exits with: 0 success, 1 validation error, 2 solver
error, 3 verification failure, 4 inconclusive verification.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import closedform, compare, csvio, pde, verify
from .config import RunConfig, load_config
from .errors import (
    DomainError,
    EllipticityError,
    MertonEqError,
    SolverError,
    ValidationError,
)
from .simulate import ScaledConsumptionPolicy, estimate_objective, simulate_paths
from .utility import ExponentialUtility, LogUtility, PowerUtility

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFY_FAIL = 3
EXIT_INCONCLUSIVE = 4


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_dir: str, command: str, cfg: RunConfig, files, extras=None) -> None:
    manifest = {
        "command": command,
        "config": cfg.raw,
        "outputs": {name: _sha256(os.path.join(out_dir, name)) for name in sorted(files)},
    }
    if extras:
        manifest.update(extras)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solve_policy(cfg: RunConfig):
    if cfg.solve.method == "pde":
        x0 = cfg.simulate.x0
        if cfg.utility.positive_domain:
            x_min = cfg.solve.x_min if cfg.solve.x_min is not None else 0.05 * x0
            x_max = cfg.solve.x_max if cfg.solve.x_max is not None else 20.0 * x0
        else:
            x_min = cfg.solve.x_min if cfg.solve.x_min is not None else x0 - 10.0
            x_max = cfg.solve.x_max if cfg.solve.x_max is not None else x0 + 10.0
        surface = pde.solve_theta(cfg.market, cfg.discount, cfg.utility, x_min, x_max, cfg.solve.n_x)
        return pde.policy_from_theta(surface, cfg.market, cfg.discount, cfg.utility), surface
    return closedform.solve_policy(cfg.market, cfg.discount, cfg.utility), None


def cmd_solve(cfg: RunConfig, out_dir: str) -> int:
    nodes = cfg.grid.nodes
    files = []
    policy, surface = _solve_policy(cfg)
    if surface is not None:
        csvio.write_surface(os.path.join(out_dir, "surface.csv"), surface)
        files.append("surface.csv")
        with open(os.path.join(out_dir, "diagnostics.txt"), "w", encoding="utf-8") as fh:
            fh.write(f"interior residual sup-norm: {surface.residual:.6e}\n")
        files.append("diagnostics.txt")
        xs = [x for x in cfg.solve.x_grid if surface.x[0] <= x <= surface.x[-1]]
    else:
        if isinstance(cfg.utility, PowerUtility):
            coeffs = closedform.solve_power(cfg.market, cfg.discount, cfg.utility.a, cfg.utility.gamma)
            csvio.write_curve(os.path.join(out_dir, "pi.csv"), nodes, coeffs.Pi)
            files.append("pi.csv")
        elif isinstance(cfg.utility, LogUtility):
            coeffs = closedform.solve_log(cfg.market, cfg.discount, cfg.utility.a)
            csvio.write_curve(os.path.join(out_dir, "varphi.csv"), nodes, coeffs.varphi)
            files.append("varphi.csv")
        elif isinstance(cfg.utility, ExponentialUtility):
            coeffs = closedform.solve_exponential(
                cfg.market, cfg.discount, cfg.utility.a, cfg.utility.gamma
            )
            csvio.write_curve(os.path.join(out_dir, "phi.csv"), nodes, coeffs.phi)
            csvio.write_curve(os.path.join(out_dir, "psi.csv"), nodes, coeffs.psi)
            files.extend(["phi.csv", "psi.csv"])
        xs = list(cfg.solve.x_grid)
    if not cfg.utility.positive_domain or all(x > 0 for x in xs):
        csvio.write_policy_slice(os.path.join(out_dir, "policy.csv"), policy, nodes, xs)
        files.append("policy.csv")
    _write_manifest(out_dir, "solve", cfg, files)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out_dir: str) -> int:
    policy, _ = _solve_policy(cfg)
    sim = cfg.simulate
    paths = simulate_paths(policy, cfg.market, 0.0, sim.x0, n_paths=sim.paths,
                           seed=sim.seed, n_workers=sim.workers)
    estimate = estimate_objective(policy, cfg.market, cfg.discount, cfg.utility,
                                  0.0, sim.x0, n_paths=sim.paths, seed=sim.seed)
    csvio.write_paths(os.path.join(out_dir, "paths.csv"), paths)
    csvio.write_estimate(os.path.join(out_dir, "estimate.csv"), estimate)
    _write_manifest(out_dir, "simulate", cfg, ["paths.csv", "estimate.csv"],
                    {"flagged_fraction": paths.flagged_fraction, "seed": sim.seed})
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out_dir: str) -> int:
    policy, _ = _solve_policy(cfg)
    vs = cfg.verify
    if vs.consumption_scale != 1.0:
        policy = ScaledConsumptionPolicy(policy, vs.consumption_scale)
    report = verify.verify_equilibrium(
        policy, cfg.market, cfg.discount, cfg.utility, vs.x0, vs.paths, vs.seed,
        checkpoints=vs.checkpoints, epsilon_fractions=vs.epsilon_fractions,
        direction_bound=vs.direction_bound,
    )
    csvio.write_residuals(os.path.join(out_dir, "residuals.csv"), report.residuals)
    csvio.write_spikes(os.path.join(out_dir, "spikes.csv"), report.spikes)
    lines = [f"verdict: {report.verdict}"]
    lines += report.notes
    if vs.n_outer > 0 and vs.n_inner > 0 and getattr(policy, "theta", None) is not None:
        for t in (vs.checkpoints or verify.default_checkpoints(cfg.grid)):
            gap, se, n = verify.nested_diagonal_check(
                policy, cfg.market, cfg.discount, cfg.utility, t, vs.x0,
                vs.n_outer, vs.n_inner, vs.seed + 70000,
            )
            lines.append(f"nested adjoint gap at t={t:.6g}: {gap:.6e} +- {se:.6e} (n={n})")
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_manifest(out_dir, "verify", cfg,
                    ["residuals.csv", "spikes.csv", "summary.txt"],
                    {"verdict": report.verdict, "seed": vs.seed})
    if report.verdict == "fail":
        return EXIT_VERIFY_FAIL
    if report.verdict == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _compare_families(cfg: RunConfig):
    cs = cfg.compare
    m, u = cfg.market, cfg.utility

    def delta(tau):
        return cs.delta_base + cs.delta_slope * np.asarray(tau, dtype=float)

    families = [("classical", lambda: compare.classical_merton(m, u, cs.delta_base)),
                ("karp-openloop", lambda: compare.karp_openloop(m, u, delta))]
    if isinstance(u, LogUtility):
        families.append(("solano-feedback", lambda: compare.solano_feedback_log(m, u.a, delta)))
        families.append(("naive", lambda: compare.naive_log_consumption(cfg.discount, u.a, 0.0)))
    elif isinstance(u, PowerUtility):
        families.append(
            ("solano-feedback", lambda: compare.solano_feedback_power(m, u.a, u.gamma, delta))
        )
    return families


def cmd_compare(cfg: RunConfig, out_dir: str) -> int:
    nodes = cfg.grid.nodes
    x0 = cfg.compare.x0
    built = {}
    notes = []
    for name, ctor in _compare_families(cfg):
        try:
            built[name] = ctor()
        except SolverError as exc:
            notes.append(f"{name}: {exc}")
    files = []
    curves = {}
    for name, policy in built.items():
        fname = f"{name}.csv"
        curve = np.array([float(np.asarray(policy.consumption(t, x0))) for t in nodes])
        curves[name] = curve
        csvio.write_curve(os.path.join(out_dir, fname), nodes, curve)
        files.append(fname)
    rows = []
    names = sorted(curves)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            for t, ca, cb in zip(nodes, curves[a], curves[b]):
                rows.append([float(t), a, b, abs(float(ca) - float(cb))])
    csvio.write_divergence(os.path.join(out_dir, "divergence.csv"), rows)
    files.append("divergence.csv")
    _write_manifest(out_dir, "compare", cfg, files, {"notes": notes} if notes else None)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mertoneq",
        description="Equilibrium consumption-investment strategies under general discounting",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--out-dir", default=None, help="override the configured output directory")
        p.add_argument("--paths", type=int, default=None, help="override the configured path count")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    import dataclasses
    sim, ver = cfg.simulate, cfg.verify
    if args.seed is not None:
        sim = dataclasses.replace(sim, seed=args.seed)
        ver = dataclasses.replace(ver, seed=args.seed)
    if args.paths is not None:
        sim = dataclasses.replace(sim, paths=args.paths)
        ver = dataclasses.replace(ver, paths=args.paths)
    out_dir = args.out_dir if args.out_dir is not None else cfg.out_dir
    return dataclasses.replace(cfg, simulate=sim, verify=ver, out_dir=out_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        return COMMANDS[args.command](cfg, cfg.out_dir)
    except (ValidationError, DomainError, EllipticityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MertonEqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
