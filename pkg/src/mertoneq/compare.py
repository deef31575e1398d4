"""Benchmark strategy families for cross-validation.

Independent implementations of the classical constant-rate optimal
strategies, the open-loop equilibrium under a time-varying instantaneous
discount rate, the feedback (sophisticated-agent) equilibria for log and
power utility, and the naive pre-commitment log consumption rule.  They
deliberately do not call into :mod:`mertoneq.closedform`, so agreement
between the two modules is a genuine check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .closedform import _check_positive_wealth, _outer, _broadcast_vec
from .discount import DiscountFunction
from .errors import ConvergenceError, DomainError, SolverError, ValidationError
from .grid import cumulative_integral, integral_to_end, simpson_quad
from .market import MarketModel
from .utility import ExponentialUtility, LogUtility, PowerUtility, Utility


@dataclass(frozen=True)
class ComparisonPolicy:
    """A benchmark strategy: family tag, feedback maps, implementation notes."""

    family: str
    utility: Utility
    consumption: Callable
    investment: Callable
    notes: tuple = ()


# ---------------------------------------------------------------------------
# shared machinery


def _rate_samples(delta: Callable, tau: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(delta(tau), dtype=float)
        if vals.shape == tau.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(delta(x)) for x in tau])


def _delay_tables(grid, delta: Callable):
    """Rate and discount factor sampled on delays tau = grid nodes."""
    tau = grid.nodes
    dta = _rate_samples(delta, tau)
    if np.any(~np.isfinite(dta)):
        raise ValidationError("discount rate curve produced non-finite samples")
    lam = np.exp(-cumulative_integral(dta, grid.dt))
    return dta, lam


def _risk_vector(m: MarketModel, t: float) -> np.ndarray:
    return m.gram_inverse(t) @ m.excess_return(t)


def _log_investment(m):
    def investment(t, x):
        return _outer(_check_positive_wealth(x), _risk_vector(m, t))
    return investment


def _power_investment(m, gamma):
    def investment(t, x):
        return _outer(_check_positive_wealth(x), _risk_vector(m, t) / (1.0 - gamma))
    return investment


def _exp_investment(m, gamma, phi_curve):
    nodes = m.grid.nodes

    def investment(t, x):
        vec = _risk_vector(m, t) / (gamma * float(np.interp(t, nodes, phi_curve)))
        return _broadcast_vec(x, vec)
    return investment


def _power_fraction(m: MarketModel, a: float, gamma: float, lam_rev: np.ndarray) -> np.ndarray:
    """Consumption-to-wealth fraction of the power family on the nodes."""
    dt = m.grid.dt
    rho = m.risk_premium_nodes()
    K = gamma * m.r0 + 0.5 * gamma / (1.0 - gamma) * rho
    w = (a * lam_rev) ** (1.0 / (gamma - 1.0)) * np.exp(integral_to_end(K, dt) / (gamma - 1.0))
    return w / (1.0 + integral_to_end(w, dt))


def _exp_phi_psi(m: MarketModel, a: float, gamma: float, lam_rev: np.ndarray):
    """Investment scale phi and consumption intercept psi on the nodes."""
    dt = m.grid.dt
    e_tail = np.exp(integral_to_end(m.r0, dt))
    phi = e_tail / (1.0 + integral_to_end(e_tail, dt))
    tail_phi = integral_to_end(phi, dt)
    rho = m.risk_premium_nodes()
    g = phi * np.log(a * lam_rev) / gamma + rho / (2.0 * gamma) - m.r0 / gamma
    psi = np.exp(-tail_phi) * integral_to_end(g * np.exp(tail_phi), dt)
    return phi, psi


def _curve_policy_log(m, a, denom_curve, family, notes):
    nodes = m.grid.nodes

    def consumption(t, x):
        return _check_positive_wealth(x) / float(np.interp(t, nodes, denom_curve))

    return ComparisonPolicy(family, LogUtility(a), consumption, _log_investment(m), notes)


def _curve_policy_power(m, a, gamma, frac_curve, family, notes):
    nodes = m.grid.nodes

    def consumption(t, x):
        return float(np.interp(t, nodes, frac_curve)) * _check_positive_wealth(x)

    return ComparisonPolicy(
        family, PowerUtility(a, gamma), consumption, _power_investment(m, gamma), notes
    )


def _curve_policy_exp(m, a, gamma, lam_rev, phi, psi, family, notes):
    nodes = m.grid.nodes
    offset = -np.log(a * lam_rev) / gamma

    def consumption(t, x):
        x = np.asarray(x, dtype=float)
        return (
            float(np.interp(t, nodes, offset))
            + float(np.interp(t, nodes, phi)) * x
            + float(np.interp(t, nodes, psi))
        )

    return ComparisonPolicy(
        family, ExponentialUtility(a, gamma), consumption,
        _exp_investment(m, gamma, phi), notes,
    )


# ---------------------------------------------------------------------------
# constant discount rate: the classical optimal strategies


def classical_merton(m: MarketModel, u: Utility, delta0: float) -> ComparisonPolicy:
    """Optimal strategies under a constant discount rate.

    With exponential discounting the equilibrium notion collapses to
    plain optimality, so these serve as the reduction oracle.
    """
    if not np.isfinite(delta0) or delta0 < 0:
        raise ValidationError(f"constant discount rate must be >= 0, got {delta0}")
    grid = m.grid
    T = grid.horizon
    ttm = T - grid.nodes
    lam_rev = np.exp(-delta0 * ttm)
    if isinstance(u, LogUtility):
        with np.errstate(invalid="ignore"):
            annuity = np.where(ttm > 0, -np.expm1(-delta0 * ttm) / delta0, 0.0) \
                if delta0 > 0 else ttm
        denom = u.a * lam_rev + annuity
        return _curve_policy_log(m, u.a, denom, "classical-merton-log",
                                 ("constant-rate annuity evaluated analytically",))
    if isinstance(u, PowerUtility):
        frac = _power_fraction(m, u.a, u.gamma, lam_rev)
        return _curve_policy_power(m, u.a, u.gamma, frac, "classical-merton-power", ())
    if isinstance(u, ExponentialUtility):
        phi, psi = _exp_phi_psi(m, u.a, u.gamma, lam_rev)
        return _curve_policy_exp(m, u.a, u.gamma, lam_rev, phi, psi, "classical-merton-exp", ())
    raise ValidationError(f"no classical benchmark for utility {type(u).__name__}")


# ---------------------------------------------------------------------------
# time-varying discount rate: open-loop equilibrium


def karp_openloop(m: MarketModel, u: Utility, delta: Callable) -> ComparisonPolicy:
    """Open-loop equilibrium under instantaneous rate delta(l).

    The log-family denominator weights future dates l by the discount
    ratio lambda(T - t) / lambda(T - l).  The exponential-utility
    investment map is taken wealth-independent, matching the other
    representation of the same strategy; the printed wealth-dependent
    variant is treated as a typo.  A free time symbol in the power
    consumption formula is resolved as the current time.
    """
    grid = m.grid
    dt = grid.dt
    dta, lam = _delay_tables(grid, delta)
    lam_rev = lam[::-1]
    if isinstance(u, LogUtility):
        # int_t^T lambda(T-t)/lambda(T-l) dl = lambda(T-t) * int_0^{T-t} dtau/lambda(tau)
        inv_cum = cumulative_integral(1.0 / lam, dt)
        denom = lam_rev * (u.a + inv_cum[::-1])
        return _curve_policy_log(m, u.a, denom, "karp-openloop-log", ())
    if isinstance(u, PowerUtility):
        frac = _power_fraction(m, u.a, u.gamma, lam_rev)
        return _curve_policy_power(
            m, u.a, u.gamma, frac, "karp-openloop-power",
            ("free time symbol in the printed formula read as the current time",),
        )
    if isinstance(u, ExponentialUtility):
        phi, psi = _exp_phi_psi(m, u.a, u.gamma, lam_rev)
        return _curve_policy_exp(
            m, u.a, u.gamma, lam_rev, phi, psi, "karp-openloop-exp",
            ("wealth-independent investment rule used",
             "discount factor inside the intercept integrand evaluated at the "
             "integration variable, not the outer time"),
        )
    raise ValidationError(f"no open-loop benchmark for utility {type(u).__name__}")


# ---------------------------------------------------------------------------
# time-varying discount rate: feedback (sophisticated-agent) equilibria


def solano_feedback_log(m: MarketModel, a: float, delta: Callable) -> ComparisonPolicy:
    """Feedback equilibrium, log utility.

    Denominator a lambda(T - t) + int_t^T lambda(l - t) dl; future dates
    are discounted by their delay from the current time, unlike the
    open-loop weighting.
    """
    LogUtility(a)
    grid = m.grid
    dta, lam = _delay_tables(grid, delta)
    # int_t^T lambda(l - t) dl = int_0^{T-t} lambda(tau) dtau
    cum_lam = cumulative_integral(lam, grid.dt)
    denom = a * lam[::-1] + cum_lam[::-1]
    return _curve_policy_log(
        m, a, denom, "solano-feedback-log",
        ("free time symbol in the printed delay resolved so the weight is "
         "lambda(l - t), recovering the constant-rate formula",),
    )


def _backward_rk4(nodes: np.ndarray, f: Callable, terminal: float) -> np.ndarray:
    dt = nodes[1] - nodes[0]
    out = np.empty_like(nodes)
    out[-1] = terminal
    for j in range(nodes.size - 2, -1, -1):
        t1 = nodes[j + 1]
        y = out[j + 1]
        k1 = f(t1, y)
        k2 = f(t1 - 0.5 * dt, y - 0.5 * dt * k1)
        k3 = f(t1 - 0.5 * dt, y - 0.5 * dt * k2)
        k4 = f(t1 - dt, y - dt * k3)
        out[j] = y - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def solano_feedback_power(
    m: MarketModel,
    a: float,
    gamma: float,
    delta: Callable,
    damping: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> ComparisonPolicy:
    """Feedback equilibrium, power utility.

    The consumption scale alpha solves an integro-differential terminal
    value problem.  Solved by damped fixed-point iteration: freeze the
    nonlocal integral term at the current iterate, integrate the
    remaining ODE backward with a fourth-order scheme, relax, repeat.
    Exponents are taken as gamma/(gamma - 1) and 1/(gamma - 1) so the
    constant-rate case collapses to the classical strategy.
    """
    PowerUtility(a, gamma)
    grid = m.grid
    nodes = grid.nodes
    dt = grid.dt
    n = grid.steps
    T = grid.horizon
    dta, lam = _delay_tables(grid, delta)
    rho = m.risk_premium_nodes()
    r0 = np.asarray(m.r0, dtype=float)
    K = gamma * r0 + 0.5 * gamma / (1.0 - gamma) * rho
    p_cons = 1.0 / (gamma - 1.0)
    p_scale = gamma / (gamma - 1.0)

    def integral_term(alpha: np.ndarray) -> np.ndarray:
        ap = alpha ** p_scale
        Delta = r0 + rho / (1.0 - gamma) - alpha ** p_cons
        cum_d = cumulative_integral(Delta, dt)
        out = np.zeros(n + 1)
        for i in range(n):
            w = (
                lam[: n - i + 1]
                * (dta[: n - i + 1] - dta[n - i])
                * ap[i:]
                * np.exp(gamma * (cum_d[i:] - cum_d[i]))
            )
            out[i] = np.trapezoid(w, dx=dt)
        return out

    alpha = np.full(n + 1, float(a))
    history = []
    for _ in range(max_iter):
        term = integral_term(alpha)

        def f(t, y):
            if y <= 0:
                raise SolverError("consumption scale lost positivity during iteration")
            return (
                (float(delta(T - t)) - float(np.interp(t, nodes, K))) * y
                - (1.0 - gamma) * y ** p_scale
                + float(np.interp(t, nodes, term))
            )

        new = _backward_rk4(nodes, f, float(a))
        updated = damping * new + (1.0 - damping) * alpha
        gap = float(np.max(np.abs(updated - alpha)))
        history.append(gap)
        alpha = updated
        if gap <= tol:
            break
    else:
        tail = ", ".join(f"{g:.3e}" for g in history[-5:])
        err = ConvergenceError(
            f"consumption-scale iteration did not reach {tol:g} in {max_iter} sweeps "
            f"(last gaps: {tail})"
        )
        err.history = history
        raise err
    frac = alpha ** p_cons
    policy = _curve_policy_power(
        m, a, gamma, frac, "solano-feedback-power",
        ("fixed-point exponents chosen so the constant-rate case reduces to "
         "the classical strategy",),
    )
    object.__setattr__(policy, "notes", policy.notes + (f"iterations: {len(history)}",))
    return policy


# ---------------------------------------------------------------------------
# naive pre-commitment log consumption


def naive_log_consumption(
    d: DiscountFunction, a: float, t0: float, quad_panels: int = 256
) -> ComparisonPolicy:
    """Pre-commitment consumption fraction of the time-t0 log-utility agent.

    Evaluated exactly as printed: the exponent adds a raw discount value
    to a log-ratio of discount values, which is intentional here (the
    terminal weight a does not enter).  Under an exponential discount
    the rule is the same for every t0; otherwise later agents deviate.
    """
    LogUtility(a)
    T = d.horizon
    if not 0.0 <= t0 <= T:
        raise DomainError(f"agent time {t0} outside [0, {T}]")

    def fraction(s: float) -> float:
        if s < t0 - 1e-12 or s > T + 1e-12:
            raise DomainError(f"evaluation time {s} outside [{t0}, {T}]")
        s = min(max(s, t0), T)
        if s >= T:
            return 1.0
        lam_s = d(s - t0)

        def integrand(r):
            r = np.asarray(r, dtype=float)
            return np.exp(d(r - s)) * d(r - t0) / lam_s

        return 1.0 / (1.0 + simpson_quad(integrand, s, T, quad_panels))

    def consumption(t, x):
        return fraction(float(t)) * _check_positive_wealth(x)

    def investment(t, x):
        raise ValidationError(
            "the naive benchmark specifies consumption only; pair it with a "
            "market-based investment map for simulation"
        )

    policy = ComparisonPolicy(
        "naive-log", LogUtility(a), consumption, investment,
        ("formula evaluated verbatim; the terminal weight is unused by it",),
    )
    object.__setattr__(policy, "fraction", fraction)
    return policy


# ---------------------------------------------------------------------------
# divergence report


def consumption_gap_curve(pa: ComparisonPolicy, pb, grid, x: float = 1.0) -> np.ndarray:
    """|c_a(t, x) - c_b(t, x)| on the grid nodes."""
    return np.array([
        abs(float(np.asarray(pa.consumption(t, x))) - float(np.asarray(pb.consumption(t, x))))
        for t in grid.nodes
    ])
