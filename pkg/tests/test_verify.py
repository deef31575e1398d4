"""Equilibrium certification: adjoints, residuals, spike variation."""

import numpy as np
import pytest

import mertoneq as mq
from mertoneq.simulate import ScaledConsumptionPolicy
from mertoneq.verify import (
    default_checkpoints,
    effective_epsilon,
    estimate_p_diagonal,
    nested_diagonal_check,
    residual_conditions,
    second_order_form,
    spike_test,
    theta_adjoint,
    unit_directions,
    verify_equilibrium,
)


@pytest.fixture
def setup(market, hyperbolic):
    u = mq.LogUtility(1.0)
    return market, hyperbolic, u, mq.solve_policy(market, hyperbolic, u)


def test_theta_adjoint_residuals_machine_zero(market, hyperbolic, utility):
    pol = mq.solve_policy(market, hyperbolic, utility)
    for t in (0.0, 0.3, 0.9):
        x = 1.2 if utility.positive_domain else 0.4
        adj = theta_adjoint(pol, hyperbolic, t, x, market)
        r_c, r_i = residual_conditions(pol, adj, market, utility)
        assert r_c <= 1e-10
        assert r_i <= 1e-10


def test_estimate_p_at_horizon_is_exact(setup):
    market, d, u, pol = setup
    T = market.grid.horizon
    # one step before T: nearly deterministic, p ~ lambda(dt) h_x compounded
    t = T - market.grid.dt
    est = estimate_p_diagonal(pol, market, d, u, t, 1.0, 4000, seed=0)
    ref = theta_adjoint(pol, d, t, 1.0, market)
    assert est.method == "nested-mc"
    assert abs(est.p - ref.p) <= 3.0 * est.p_stderr + 1e-4


def test_estimate_p_matches_theta_shortcut(setup):
    market, d, u, pol = setup
    est = estimate_p_diagonal(pol, market, d, u, 0.5, 1.0, 20000, seed=4)
    ref = theta_adjoint(pol, d, 0.5, 1.0, market)
    # single-level estimate carries an O(dt) weak bias on top of the noise
    assert abs(est.p - ref.p) <= 3.0 * est.p_stderr + 10.0 * market.grid.dt * abs(ref.p)
    assert est.conclusive


def test_nested_check_richardson_within_noise(setup):
    market, d, u, pol = setup
    gap, se, n = nested_diagonal_check(pol, market, d, u, 0.5, 1.0, 200, 400, seed=8)
    assert n > 190
    assert abs(gap) <= 4.0 * se


def test_corrupted_policy_has_large_consumption_residual(setup):
    market, d, u, pol = setup
    bad = ScaledConsumptionPolicy(pol, 2.0)
    est = estimate_p_diagonal(bad, market, d, u, 0.25, 1.0, 5000, seed=1)
    c = float(bad.consumption(0.25, 1.0))
    r_c = abs(float(u.phi_c(c)) - est.p)
    assert r_c > 5.0 * max(est.p_stderr, 1e-12)


def test_effective_epsilon_counts_whole_steps(grid):
    assert effective_epsilon(grid, 0.0, 0.1) == pytest.approx(0.1)
    assert effective_epsilon(grid, 0.0, 0.014) == pytest.approx(0.02)
    # below one step the window still covers a single node
    assert effective_epsilon(grid, 0.0, 1e-6) == pytest.approx(grid.dt)


def test_unit_directions_shape_and_bound():
    dirs = unit_directions(2, 0.05)
    assert len(dirs) == 6
    stacked = np.stack(dirs)
    assert np.all(np.abs(stacked).sum(axis=1) == pytest.approx(0.05))
    assert len(unit_directions(2, 0.0)) == 6  # zero bound keeps the rows


def test_spike_zero_direction_zero_variance(setup):
    market, d, u, pol = setup
    res = spike_test(pol, market, d, u, 0.0, 1.0, np.zeros(2), [0.1, 0.05], 200, seed=0)
    assert res.extrapolated == 0.0
    assert res.extrapolated_stderr == 0.0
    assert np.all(res.deltas == 0.0)


def test_spike_argument_validation(setup):
    market, d, u, pol = setup
    with pytest.raises(mq.DomainError):
        spike_test(pol, market, d, u, 0.0, 1.0, np.zeros(2), [0.05, 0.1], 100, seed=0)
    with pytest.raises(mq.DomainError):
        spike_test(pol, market, d, u, 0.9, 1.0, np.zeros(2), [0.5, 0.2], 100, seed=0)


def test_spike_nonpositive_at_equilibrium(setup):
    market, d, u, pol = setup
    for v in ([0.05, 0.0], [-0.05, 0.0]):
        res = spike_test(
            pol, market, d, u, 0.0, 1.0, v, [0.1, 0.05, 0.025], 20000, seed=12
        )
        assert res.extrapolated <= 3.0 * res.extrapolated_stderr
        assert res.conclusive


def test_spike_flags_doubled_consumption(setup):
    market, d, u, pol = setup
    bad = ScaledConsumptionPolicy(pol, 2.0)
    res = spike_test(
        bad, market, d, u, 0.0, 1.0, [-0.05, 0.0], [0.1, 0.05, 0.025], 20000, seed=12
    )
    assert res.extrapolated > 3.0 * res.extrapolated_stderr


def test_second_order_adjoint_negative(setup):
    market, d, u, pol = setup
    so = second_order_form(market, d, u, pol, 0.25, 0.5, 1.2, 2000, seed=7)
    assert so.P < 0
    assert np.all(np.linalg.eigvalsh(so.A) <= 1e-10)
    assert so.Q is None
    # s = T reduces to the terminal condition
    T = market.grid.horizon
    end = second_order_form(market, d, u, pol, 0.25, T, 1.2, 10, seed=7)
    assert end.P == pytest.approx(float(d(T - 0.25)) * float(u.h_xx(1.2)), rel=1e-12)


def test_default_checkpoints_span_horizon(grid):
    cps = default_checkpoints(grid)
    assert cps[0] == 0.0
    assert cps[-1] == pytest.approx(grid.horizon - grid.dt)
    assert len(cps) == 5


def test_verify_equilibrium_passes(setup):
    market, d, u, pol = setup
    rep = verify_equilibrium(pol, market, d, u, 1.0, 4000, seed=2,
                             checkpoints=[0.0, 0.5])
    assert rep.verdict == "pass"
    assert not rep.notes
    assert len(rep.residuals) == 2


def test_verify_equilibrium_rejects_corrupted(setup):
    market, d, u, pol = setup
    bad = ScaledConsumptionPolicy(pol, 2.0)
    rep = verify_equilibrium(bad, market, d, u, 1.0, 4000, seed=2,
                             checkpoints=[0.0])
    assert rep.verdict == "fail"
    assert any("positive spike derivative" in n for n in rep.notes)
