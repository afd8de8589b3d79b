"""Unit tests for the converter model, integrator and critical-duration search."""

import math

import numpy as np
import pytest

from lvrt_pinn.dynamics import (
    ConverterParams,
    ConverterState,
    Criterion,
    DisturbanceSpec,
    algebraic_eval,
    critical_duration,
    find_equilibrium,
    integrate,
    lvrt_factor,
    read_trajectory_csv,
    rhs,
    simulate_batch,
    write_trajectory_csv,
)
from lvrt_pinn.errors import ModelValidityError, NonMonotoneCriterionError


def analytic_v_meas(delta_V: float, t: float, params: ConverterParams) -> float:
    """V_meas during a dip that started from the 1 pu equilibrium."""
    return 1.0 - delta_V + delta_V * math.exp(-t / params.T_m)


def analytic_lvrt_duration(delta_V: float, params: ConverterParams) -> float:
    """Dip duration at which V_meas just reaches V_int."""
    drop = 1.0 - params.V_int
    return params.T_m * math.log(delta_V / (delta_V - drop))


def analytic_power_duration(delta_V: float, mu: float, params: ConverterParams) -> float:
    """Dip duration at which the settled post-fault P_total just reaches mu * P_ext.

    After recovery V_meas = 1 and theta = 0, so the currents settle at
    f * (P_ext, -Q_ext) and P_total = P_ext * f - R_c * (P_ext**2 + Q_ext**2) * f**2.
    The latched f is the droop value at the nadir reached at the clearing instant.
    """
    loss = params.R_c * (params.P_ext**2 + params.Q_ext**2)
    f = (params.P_ext - math.sqrt(params.P_ext**2 - 4 * loss * mu * params.P_ext)) / (2 * loss)
    nadir = params.V_min + f * (params.V_int - params.V_min) / params.c
    return -params.T_m * math.log(1.0 - (1.0 - nadir) / delta_V)


# ============================================================================
# Parameters and disturbances
# ============================================================================


def test_default_params_validate(params):
    """Test that the default parameter set passes validation."""
    assert params.validate() is params


@pytest.mark.parametrize(
    "overrides",
    [{"V_min": 0.8}, {"T_m": 0.0}, {"c": 1.5}, {"I_nom": -1.0}, {"V_Q": 1.2}],
)
def test_params_reject_invalid_overrides(params, overrides):
    """Test that with_overrides validates the new values."""
    with pytest.raises(ValueError):
        params.with_overrides(**overrides)


def test_disturbance_validation():
    """Test rejection of impossible dips."""
    with pytest.raises(ValueError):
        DisturbanceSpec(delta_V=1.0, delta_T=0.1)
    with pytest.raises(ValueError):
        DisturbanceSpec(delta_V=0.3, delta_T=-0.1)


def test_disturbance_voltage_profile():
    """Test the rectangular external voltage."""
    d = DisturbanceSpec(delta_V=0.4, delta_T=0.1)
    assert d.voltage(0.0) == pytest.approx(0.6)
    assert d.voltage(0.0999) == pytest.approx(0.6)
    assert d.voltage(0.1) == 1.0
    assert d.voltage(0.5) == 1.0


# ============================================================================
# Algebraic relations and equilibrium
# ============================================================================


def test_lvrt_factor_pieces(params):
    """Test the three pieces of the LVRT characteristic."""
    v = np.array([1.0, 0.7, 0.5, 0.3, 0.1])
    f = lvrt_factor(np, v, params)
    assert f[0] == 1.0
    assert f[1] == 1.0
    assert f[2] == pytest.approx(params.c * 0.2 / 0.4)
    assert f[3] == pytest.approx(0.0)
    assert f[4] == 0.0


def test_lvrt_factor_is_monotone(params):
    """Test that the characteristic never decreases with voltage."""
    v = np.linspace(0.0, 1.2, 1001)
    assert np.all(np.diff(lvrt_factor(np, v, params)) >= 0)


def test_equilibrium_residual(params):
    """Test that the pre-fault equilibrium zeroes the state derivatives."""
    x0 = find_equilibrium(params, V_t=1.0)

    assert np.max(np.abs(rhs(x0, 1.0, params))) < 1e-10
    assert x0.f_latched == 1.0
    assert x0.theta_pll == pytest.approx(0.0, abs=1e-12)
    assert x0.i_d == pytest.approx(params.P_ext)
    assert x0.i_q == pytest.approx(-params.Q_ext)
    assert x0.V_meas == pytest.approx(1.0)


@pytest.mark.parametrize(
    ("overrides", "i_d", "i_q"),
    [
        ({"R_c": 0.0, "L_c": 0.0}, 0.8, -0.2),
        ({"P_ext": 0.0, "Q_ext": 0.0}, 0.0, 0.0),
    ],
    ids=["lossless-coupling", "zero-setpoints"],
)
def test_equilibrium_degenerate_cases(params, overrides, i_d, i_q):
    """Test the equilibrium without coupling impedance and without power set-points."""
    degenerate = params.with_overrides(**overrides)
    x0 = find_equilibrium(degenerate, V_t=1.0)

    assert np.max(np.abs(rhs(x0, 1.0, degenerate))) < 1e-10
    assert x0.i_d == pytest.approx(i_d, abs=1e-10)
    assert x0.i_q == pytest.approx(i_q, abs=1e-10)
    assert x0.V_meas == pytest.approx(1.0)


def test_equilibrium_requires_voltage_above_lvrt_threshold(params):
    """Test that no equilibrium is searched at or below V_int."""
    with pytest.raises(ValueError):
        find_equilibrium(params, V_t=params.V_int)


def test_power_identities(params):
    """Test the terminal power relations against the coupling losses."""
    state = ConverterState(theta_pll=0.05, i_d=0.7, i_q=-0.3, V_meas=0.85, f_latched=1.0)
    alg = algebraic_eval(state, 0.9, params)
    current_sq = state.i_d**2 + state.i_q**2

    assert alg.P_VSC == pytest.approx(alg.v_d * state.i_d + alg.v_q * state.i_q)
    assert alg.P_total == pytest.approx(alg.P_VSC - params.R_c * current_sq)
    assert alg.Q_total == pytest.approx(alg.Q_VSC - alg.omega_pll * params.L_c * current_sq)
    assert alg.V_PCC == pytest.approx(0.9)


def test_algebraic_eval_rejects_negative_voltage(params):
    """Test that a negative external voltage is refused."""
    state = ConverterState(0.0, 0.8, -0.2, 1.0)
    with pytest.raises(ValueError):
        algebraic_eval(state, -0.1, params)


def test_rhs_below_voltage_floor(params):
    """Test that a collapsed V_meas leaves the validity region."""
    state = ConverterState(0.0, 0.8, -0.2, 1e-9)
    with pytest.raises(ModelValidityError):
        rhs(state, 1.0, params)


# ============================================================================
# Integration
# ============================================================================


def test_v_meas_follows_first_order_lag(params):
    """Test the simulated nadir against the closed-form filter response."""
    x0 = find_equilibrium(params)
    trajectory = integrate(x0, DisturbanceSpec(0.4, 0.1), params, dt=1e-3, horizon=0.3)

    assert len(trajectory) == 301
    assert trajectory.min_v_meas == pytest.approx(analytic_v_meas(0.4, 0.1, params), abs=1e-8)
    assert trajectory.column("V_meas")[100] == pytest.approx(trajectory.min_v_meas)
    assert trajectory.column("V_t")[99] == pytest.approx(0.6)
    assert trajectory.column("V_t")[100] == 1.0


def test_zero_dip_keeps_the_equilibrium(params):
    """Test that a zero-magnitude disturbance leaves every state in place for 1 s."""
    x0 = find_equilibrium(params)
    trajectory = integrate(x0, DisturbanceSpec(0.0, 0.2), params, dt=1e-3, horizon=1.0)

    drift = np.abs(trajectory.states[:, :4] - x0.continuous())
    assert np.max(drift) < 1e-7
    assert np.all(trajectory.column("f_latched") == 1.0)


def test_unaligned_clearing_splits_the_step(params):
    """Test that a clearing instant between grid points is hit exactly."""
    x0 = find_equilibrium(params)
    trajectory = integrate(x0, DisturbanceSpec(0.4, 0.1234), params, dt=1e-3, horizon=0.3)

    assert trajectory.min_v_meas == pytest.approx(analytic_v_meas(0.4, 0.1234, params), abs=1e-8)


def test_rk4_global_error_is_fourth_order(params):
    """Test that halving the step cuts the error by about 16."""
    x0 = find_equilibrium(params)
    exact = analytic_v_meas(0.4, 0.2, params)
    errors = []
    for dt in (0.02, 0.01):
        trajectory = integrate(x0, DisturbanceSpec(0.4, 0.2), params, dt=dt, horizon=0.2)
        errors.append(abs(trajectory.final("V_meas") - exact))

    assert 13.0 < errors[0] / errors[1] < 19.0


def test_deep_dip_latches_the_lvrt_factor(params):
    """Test that f_latched keeps the deepest value after voltage recovery."""
    x0 = find_equilibrium(params)
    trajectory = integrate(x0, DisturbanceSpec(0.6, 0.25), params, dt=1e-3, horizon=1.0)
    latched = trajectory.column("f_latched")

    assert np.all(np.diff(latched) <= 0)
    assert trajectory.final("f_latched") == pytest.approx(
        float(lvrt_factor(np, trajectory.min_v_meas, params))
    )
    assert trajectory.final("f_latched") < params.c
    assert trajectory.final("V_meas") > params.V_int
    assert trajectory.final("P_total") < 0.5 * params.P_ext


def test_latch_never_increases_across_random_dips(params):
    """Test the ratchet on 50 random disturbances simulated in one batch."""
    rng = np.random.default_rng(7)
    disturbances = [
        DisturbanceSpec(float(dv), float(dT))
        for dv, dT in zip(rng.uniform(0.0, 0.85, 50), rng.uniform(0.01, 0.25, 50), strict=True)
    ]
    x0 = find_equilibrium(params)

    trajectories = simulate_batch(x0, disturbances, params, dt=0.01, horizon=0.5)

    for d, trajectory in zip(disturbances, trajectories, strict=True):
        latched = trajectory.column("f_latched")
        assert np.all(np.diff(latched) <= 0), d
        expected = float(lvrt_factor(np, trajectory.min_v_meas, params))
        assert latched[-1] == pytest.approx(expected, abs=1e-12), d


def test_shallow_dip_restores_full_power(params):
    """Test that a dip above V_int never latches and power returns."""
    x0 = find_equilibrium(params)
    trajectory = integrate(x0, DisturbanceSpec(0.2, 0.1), params, dt=1e-3, horizon=1.0)
    current_sq = trajectory.final("i_d") ** 2 + trajectory.final("i_q") ** 2

    assert np.all(trajectory.column("f_latched") == 1.0)
    assert trajectory.min_v_meas > params.V_int
    assert trajectory.final("P_total") == pytest.approx(
        params.P_ext - params.R_c * current_sq, abs=1e-3
    )


def test_batch_matches_single_runs(params):
    """Test that batching does not change any disturbance's arithmetic."""
    x0 = find_equilibrium(params)
    disturbances = [
        DisturbanceSpec(0.3, 0.1),
        DisturbanceSpec(0.5, 0.1234),
        DisturbanceSpec(0.7, 0.2),
    ]
    batch = simulate_batch(x0, disturbances, params, dt=1e-3, horizon=0.4)

    for d, batched in zip(disturbances, batch, strict=True):
        single = integrate(x0, d, params, dt=1e-3, horizon=0.4)
        np.testing.assert_array_equal(batched.states, single.states)
        assert batched.min_v_meas == single.min_v_meas


def test_horizon_must_cover_the_dip(params):
    """Test rejection of a horizon shorter than the dip."""
    x0 = find_equilibrium(params)
    with pytest.raises(ValueError):
        integrate(x0, DisturbanceSpec(0.4, 0.5), params, dt=1e-3, horizon=0.3)


def test_horizon_must_be_a_multiple_of_dt(params):
    """Test rejection of a horizon that is not on the step grid."""
    x0 = find_equilibrium(params)
    with pytest.raises(ValueError):
        integrate(x0, DisturbanceSpec(0.4, 0.1), params, dt=0.03, horizon=0.1)


def test_trajectory_csv_round_trip(tmp_path, params):
    """Test that a written trajectory reads back with its disturbance."""
    x0 = find_equilibrium(params)
    trajectory = integrate(x0, DisturbanceSpec(0.4, 0.1), params, dt=0.01, horizon=0.3)
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(trajectory, path)

    loaded = read_trajectory_csv(path)

    np.testing.assert_array_equal(loaded.states, trajectory.states)
    np.testing.assert_array_equal(loaded.algebraic, trajectory.algebraic)
    assert loaded.disturbance.delta_V == pytest.approx(0.4)
    assert loaded.disturbance.delta_T == pytest.approx(0.1)


# ============================================================================
# Critical duration
# ============================================================================


@pytest.mark.parametrize("delta_V", [0.35, 0.4, 0.5, 0.6, 0.8])
def test_lvrt_critical_duration_matches_closed_form(params, delta_V):
    """Test bisection against the closed-form LVRT entry time."""
    result = critical_duration(delta_V, Criterion.lvrt_entry(), params, dt=1e-3, horizon=0.3)

    assert result.status == "optimal"
    assert result.delta_T == pytest.approx(analytic_lvrt_duration(delta_V, params), abs=2e-4)
    assert result.evaluations > 2


def test_lvrt_boundary_at_four_tenths(params):
    """Test the reference boundary value for a 0.4 pu dip."""
    assert analytic_lvrt_duration(0.4, params) == pytest.approx(0.1733, abs=1e-4)


def test_shallow_dip_is_never_critical(params):
    """Test that a dip that cannot reach V_int reports the bracket end."""
    result = critical_duration(0.25, Criterion.lvrt_entry(), params, dt=1e-3, horizon=0.3)

    assert result.status == "never-critical"
    assert result.delta_T == 0.25


def test_deep_dip_is_always_critical(params):
    """Test that a dip critical at the lower bracket end is reported as such."""
    result = critical_duration(
        0.8, Criterion.lvrt_entry(), params, dt=1e-3, horizon=0.3, bracket=(0.2, 0.25)
    )

    assert result.status == "always-critical"
    assert result.delta_T == 0.2


@pytest.mark.parametrize("delta_V", [0.6, 0.7])
def test_power_critical_duration_matches_closed_form(params, delta_V):
    """Test the post-fault power boundary against the settled latched-power relation."""
    result = critical_duration(
        delta_V, Criterion.power_fraction(0.3), params, dt=0.01, horizon=2.0, bracket=(0.0, 0.25)
    )

    assert result.status == "optimal"
    assert result.delta_T == pytest.approx(analytic_power_duration(delta_V, 0.3, params), abs=3e-4)


def test_power_criterion_spares_a_shallow_dip(params):
    """Test that a dip whose nadir keeps f above mu is never critical."""
    result = critical_duration(
        0.4, Criterion.power_fraction(0.3), params, dt=0.01, horizon=2.0, bracket=(0.0, 0.25)
    )

    assert result.status == "never-critical"


def test_non_monotone_criterion_is_a_numeric_error(params):
    """Test that a criterion critical only for short dips is refused."""

    class ShortDipsOnly(Criterion):
        def is_critical(self, trajectory, params):
            return trajectory.disturbance.delta_T < 0.1

    with pytest.raises(NonMonotoneCriterionError):
        critical_duration(0.5, ShortDipsOnly(), params, dt=0.01, horizon=0.3)


def test_criterion_validation():
    """Test rejection of unknown criteria and out-of-range fractions."""
    with pytest.raises(ValueError):
        Criterion(kind="frequency")
    with pytest.raises(ValueError):
        Criterion.power_fraction(1.5)
