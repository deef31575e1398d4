"""Strict JSON run configuration.

Every section has a fixed field vocabulary; unknown fields are rejected
so that typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .discount import DiscountFunction, Exponential, Hyperbolic, KarpRate, Mixture
from .errors import ValidationError
from .grid import TimeGrid
from .market import MarketModel
from .utility import ExponentialUtility, LogUtility, PowerUtility, Utility


def _section(raw: dict, name: str, required: tuple, optional: tuple = ()) -> dict:
    if not isinstance(raw, dict):
        raise ValidationError(f"config section '{name}' must be an object")
    unknown = set(raw) - set(required) - set(optional)
    if unknown:
        raise ValidationError(f"unknown fields in '{name}': {sorted(unknown)}")
    missing = set(required) - set(raw)
    if missing:
        raise ValidationError(f"missing fields in '{name}': {sorted(missing)}")
    return raw


def _linear_rate(base: float, slope: float):
    def rate(tau):
        return base + slope * np.asarray(tau, dtype=float)
    return rate


def build_discount(raw: dict, horizon: float) -> DiscountFunction:
    if "variant" not in raw:
        raise ValidationError("discount section needs a 'variant' field")
    variant = raw["variant"]
    if variant == "exponential":
        sec = _section(raw, "discount", ("variant", "delta0"))
        return Exponential(float(sec["delta0"]), horizon)
    if variant == "hyperbolic":
        sec = _section(raw, "discount", ("variant", "k", "beta"))
        return Hyperbolic(float(sec["k"]), float(sec["beta"]), horizon)
    if variant == "mixture":
        sec = _section(raw, "discount", ("variant", "weights", "rates"))
        return Mixture(tuple(sec["weights"]), tuple(sec["rates"]), horizon)
    if variant == "karp":
        sec = _section(raw, "discount", ("variant", "base"), ("slope", "quad_panels"))
        return KarpRate(
            _linear_rate(float(sec["base"]), float(sec.get("slope", 0.0))),
            horizon,
            int(sec.get("quad_panels", 256)),
        )
    raise ValidationError(f"unknown discount variant '{variant}'")


def build_utility(raw: dict) -> Utility:
    if "variant" not in raw:
        raise ValidationError("utility section needs a 'variant' field")
    variant = raw["variant"]
    if variant == "power":
        sec = _section(raw, "utility", ("variant", "a", "gamma"))
        return PowerUtility(float(sec["a"]), float(sec["gamma"]))
    if variant == "log":
        sec = _section(raw, "utility", ("variant", "a"))
        return LogUtility(float(sec["a"]))
    if variant == "exponential":
        sec = _section(raw, "utility", ("variant", "a", "gamma"))
        return ExponentialUtility(float(sec["a"]), float(sec["gamma"]))
    raise ValidationError(f"unknown utility variant '{variant}'")


@dataclass(frozen=True)
class SolveSettings:
    method: str = "closedform"      # or "pde"
    x_grid: tuple = (0.5, 1.0, 2.0)
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    n_x: int = 200


@dataclass(frozen=True)
class SimulateSettings:
    x0: float = 1.0
    paths: int = 1000
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class VerifySettings:
    x0: float = 1.0
    paths: int = 20000
    seed: int = 0
    checkpoints: Optional[tuple] = None
    epsilon_fractions: tuple = (0.1, 0.05, 0.025)
    direction_bound: float = 0.05
    n_outer: int = 0
    n_inner: int = 0
    consumption_scale: float = 1.0


@dataclass(frozen=True)
class CompareSettings:
    delta_base: float = 0.1
    delta_slope: float = 0.1
    x0: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    grid: TimeGrid
    market: MarketModel
    discount: DiscountFunction
    utility: Utility
    solve: SolveSettings = field(default_factory=SolveSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)
    compare: CompareSettings = field(default_factory=CompareSettings)
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, compare=False)


def parse_config(raw: dict) -> RunConfig:
    top = _section(
        raw, "config", ("grid", "market", "discount", "utility"),
        ("solve", "simulate", "verify", "compare", "out_dir"),
    )
    gsec = _section(top["grid"], "grid", ("T", "n"))
    grid = TimeGrid(float(gsec["T"]), int(gsec["n"]))
    msec = _section(top["market"], "market", ("r0", "mu", "sigma"))
    market = MarketModel(grid, msec["r0"], msec["mu"], msec["sigma"])
    discount = build_discount(top["discount"], grid.horizon)
    utility = build_utility(top["utility"])

    ssec = _section(top.get("solve", {}), "solve", (),
                    ("method", "x_grid", "x_min", "x_max", "n_x"))
    solve = SolveSettings(
        method=str(ssec.get("method", "closedform")),
        x_grid=tuple(float(v) for v in ssec.get("x_grid", (0.5, 1.0, 2.0))),
        x_min=None if ssec.get("x_min") is None else float(ssec["x_min"]),
        x_max=None if ssec.get("x_max") is None else float(ssec["x_max"]),
        n_x=int(ssec.get("n_x", 200)),
    )
    if solve.method not in ("closedform", "pde"):
        raise ValidationError(f"solve.method must be 'closedform' or 'pde', got '{solve.method}'")

    simsec = _section(top.get("simulate", {}), "simulate", (),
                      ("x0", "paths", "seed", "workers"))
    simulate = SimulateSettings(
        x0=float(simsec.get("x0", 1.0)),
        paths=int(simsec.get("paths", 1000)),
        seed=int(simsec.get("seed", 0)),
        workers=int(simsec.get("workers", 1)),
    )

    vsec = _section(top.get("verify", {}), "verify", (),
                    ("x0", "paths", "seed", "checkpoints", "epsilon_fractions",
                     "direction_bound", "n_outer", "n_inner", "consumption_scale"))
    verify = VerifySettings(
        x0=float(vsec.get("x0", 1.0)),
        paths=int(vsec.get("paths", 20000)),
        seed=int(vsec.get("seed", 0)),
        checkpoints=None if vsec.get("checkpoints") is None
        else tuple(float(v) for v in vsec["checkpoints"]),
        epsilon_fractions=tuple(float(v) for v in vsec.get("epsilon_fractions", (0.1, 0.05, 0.025))),
        direction_bound=float(vsec.get("direction_bound", 0.05)),
        n_outer=int(vsec.get("n_outer", 0)),
        n_inner=int(vsec.get("n_inner", 0)),
        consumption_scale=float(vsec.get("consumption_scale", 1.0)),
    )

    csec = _section(top.get("compare", {}), "compare", (),
                    ("delta_base", "delta_slope", "x0"))
    compare = CompareSettings(
        delta_base=float(csec.get("delta_base", 0.1)),
        delta_slope=float(csec.get("delta_slope", 0.1)),
        x0=float(csec.get("x0", 1.0)),
    )

    return RunConfig(grid, market, discount, utility, solve, simulate, verify,
                     compare, str(top.get("out_dir", "out")), raw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)
