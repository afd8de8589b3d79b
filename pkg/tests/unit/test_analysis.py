"""Unit tests for boundary queries, sweeps, curve files and comparisons."""

import math

import numpy as np
import pytest

import lvrt_pinn.analysis.boundary as boundary_module
from lvrt_pinn.analysis import (
    BoundaryCurve,
    BoundaryQuery,
    CurvePoint,
    compare_curves,
    ground_truth_curve,
    plot_table,
    read_curve,
    solve_lvrt,
    solve_output_extremum,
    solve_power,
    solve_query,
    sweep,
    trajectory_error,
    write_curve,
)
from lvrt_pinn.dataset import InputBox
from lvrt_pinn.dynamics import Criterion, DisturbanceSpec, find_equilibrium, integrate
from lvrt_pinn.errors import CurveComparisonError, NodeLimitError
from lvrt_pinn.milp import interval_bounds
from lvrt_pinn.pinn import AffineScaling, MlpModel

BOX = InputBox(t=(0.0, 1.0), delta_V=(0.2, 0.8), delta_T=(0.1, 0.25))


@pytest.fixture
def dip_model():
    """V_meas = 1 - max(dV + dT - 0.4, 0) and P_total = 0.8 - max(dV + dT - 0.4, 0).

    The second hidden neuron, max(t - 0.5, 0), feeds no output.
    """
    return MlpModel(
        weights=[
            np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]]),
            np.array([[-1.0, 0.0], [-1.0, 0.0]]),
        ],
        biases=[np.array([-0.4, -0.5]), np.array([1.0, 0.8])],
        input_scaling=AffineScaling.identity(3),
        output_scaling=AffineScaling.identity(2),
        output_names=("V_meas", "P_total"),
    )


@pytest.fixture
def dip_bounds(dip_model):
    """Interval bounds of the dip model over BOX."""
    return interval_bounds(dip_model, BOX)


def make_curve(delta_V, delta_T, statuses=None, kind="lvrt") -> BoundaryCurve:
    statuses = statuses or ["optimal"] * len(delta_V)
    return BoundaryCurve(
        kind=kind,
        parameter=0.0,
        points=[CurvePoint(v, t, s, t) for v, t, s in zip(delta_V, delta_T, statuses, strict=True)],
    )


# ============================================================================
# Boundary queries
# ============================================================================


@pytest.mark.parametrize(
    "delta_V, status, expected",
    [(0.4, "never-critical", 0.25), (0.5, "optimal", 0.2), (0.55, "optimal", 0.15)],
)
def test_lvrt_boundary_of_the_dip_model(dip_model, dip_bounds, delta_V, status, expected):
    """Test delta_T = 0.7 - delta_V, capped at the box maximum."""
    result = solve_lvrt(dip_model, dip_bounds, delta_V)

    assert result.status == status
    assert result.delta_T == pytest.approx(expected, abs=1e-7)
    assert result.constrained_value >= 0.7 - 1e-7
    assert result.nodes >= 1


def test_lvrt_boundary_infeasible_for_deep_dip(dip_model, dip_bounds):
    """Test that a dip critical even at the shortest duration is infeasible."""
    result = solve_lvrt(dip_model, dip_bounds, 0.7)

    assert result.status == "infeasible"
    assert math.isnan(result.delta_T)


def test_lvrt_margin_shortens_the_duration(dip_model, dip_bounds):
    """Test that epsilon = 0.05 moves the boundary by 0.05 s."""
    result = solve_lvrt(dip_model, dip_bounds, 0.5, epsilon=0.05)

    assert result.status == "optimal"
    assert result.delta_T == pytest.approx(0.15, abs=1e-7)


def test_power_boundary_of_the_dip_model(dip_model, dip_bounds):
    """Test the power floor mu * P_ext at t = 1 s."""
    relaxed = solve_power(dip_model, dip_bounds, 0.4, mu=0.0)
    strict = solve_power(dip_model, dip_bounds, 0.4, mu=0.75)

    assert relaxed.status == "never-critical"
    assert relaxed.delta_T == pytest.approx(0.25, abs=1e-7)
    assert strict.status == "optimal"
    assert strict.delta_T == pytest.approx(0.2, abs=1e-7)
    assert strict.constrained_value == pytest.approx(0.6, abs=1e-7)


def test_query_validation_and_dispatch(dip_model, dip_bounds):
    """Test BoundaryQuery checks and solve_query dispatch."""
    with pytest.raises(ValueError):
        BoundaryQuery("voltage", 0.0, 0.5)
    with pytest.raises(ValueError):
        BoundaryQuery("lvrt", -0.1, 0.5)
    with pytest.raises(ValueError):
        BoundaryQuery("power", 1.5, 0.5)
    with pytest.raises(ValueError):
        BoundaryQuery("lvrt", 0.0, 0.9, box=BOX)

    result = solve_query(dip_model, dip_bounds, BoundaryQuery("lvrt", 0.0, 0.5, box=BOX))
    assert result.delta_T == pytest.approx(0.2, abs=1e-7)


def test_delta_V_outside_the_box_is_refused(dip_model, dip_bounds):
    """Test that a magnitude outside the encoded box raises ValueError."""
    with pytest.raises(ValueError):
        solve_lvrt(dip_model, dip_bounds, 0.9)
    with pytest.raises(ValueError):
        solve_power(dip_model, dip_bounds, 0.5, mu=1.2)


# ============================================================================
# Output extrema
# ============================================================================


def test_output_extremum_over_the_box(dip_model, dip_bounds):
    """Test min V_meas and max P_total over the whole box."""
    low = solve_output_extremum(dip_model, dip_bounds, "V_meas", "min")
    high = solve_output_extremum(dip_model, dip_bounds, "P_total", "max")

    assert low.value == pytest.approx(0.35, abs=1e-7)
    assert low.inputs["delta_V"] == pytest.approx(0.8, abs=1e-7)
    assert low.inputs["delta_T"] == pytest.approx(0.25, abs=1e-7)
    assert high.value == pytest.approx(0.8, abs=1e-7)


def test_output_extremum_with_pinned_inputs(dip_model, dip_bounds):
    """Test the predicted nadir of one disturbance."""
    result = solve_output_extremum(
        dip_model, dip_bounds, "V_meas", "min", {"delta_V": 0.5, "delta_T": 0.15}
    )

    assert result.status == "optimal"
    assert result.value == pytest.approx(0.75, abs=1e-7)


def test_output_extremum_argument_checks(dip_model, dip_bounds):
    """Test rejection of an unknown output or sense."""
    with pytest.raises(KeyError):
        solve_output_extremum(dip_model, dip_bounds, "Q_total")
    with pytest.raises(ValueError):
        solve_output_extremum(dip_model, dip_bounds, "V_meas", "lowest")


# ============================================================================
# Sweeps
# ============================================================================


def test_sweep_collects_points_in_grid_order(dip_model, dip_bounds):
    """Test statuses, durations and metadata of an LVRT sweep."""
    curve = sweep(dip_model, dip_bounds, "lvrt", 0.0, [0.4, 0.5, 0.55, 0.7])

    assert curve.statuses == ["never-critical", "optimal", "optimal", "infeasible"]
    np.testing.assert_allclose(curve.delta_T[:3], [0.25, 0.2, 0.15], atol=1e-7)
    assert math.isnan(curve.delta_T[3])
    assert curve.bounds_source == "interval"
    assert curve.metadata["kind"] == "lvrt"
    assert curve.metadata["input_lower"] == [0.0, 0.2, 0.1]
    assert len(curve.metadata["model_hash"]) > 0


def test_sweep_with_threads_matches_serial(dip_model, dip_bounds):
    """Test that parallel points come back in grid order with equal values."""
    grid = [0.45, 0.5, 0.55, 0.6]
    serial = sweep(dip_model, dip_bounds, "power", 0.75, grid)
    threaded = sweep(dip_model, dip_bounds, "power", 0.75, grid, workers=2)

    np.testing.assert_array_equal(serial.delta_T, threaded.delta_T)
    assert serial.statuses == threaded.statuses


def test_sweep_grid_validation(dip_model, dip_bounds):
    """Test rejection of unordered grids, bad parameters and points outside the box."""
    with pytest.raises(ValueError):
        sweep(dip_model, dip_bounds, "lvrt", 0.0, [0.5, 0.4])
    with pytest.raises(ValueError):
        sweep(dip_model, dip_bounds, "lvrt", 0.0, [])
    with pytest.raises(ValueError):
        sweep(dip_model, dip_bounds, "lvrt", 0.0, [0.5, 0.85])
    with pytest.raises(ValueError):
        sweep(dip_model, dip_bounds, "power", 2.0, [0.5])


def test_sweep_records_failed_points(dip_model, dip_bounds, monkeypatch):
    """Test that a solver failure marks the point failed and the sweep continues."""
    real = boundary_module.branch_and_bound

    def flaky(problem, node_limit):
        if problem.variables[problem.input_index("delta_V")].lower == 0.5:
            raise NodeLimitError("Node limit 1 reached", operation="milp.branch_and_bound")
        return real(problem, node_limit=node_limit)

    monkeypatch.setattr(boundary_module, "branch_and_bound", flaky)
    curve = sweep(dip_model, dip_bounds, "lvrt", 0.0, [0.4, 0.5, 0.55])

    assert curve.statuses == ["never-critical", "failed", "optimal"]
    assert "Node limit" in curve.points[1].error


# ============================================================================
# Curves
# ============================================================================


def test_curve_points_must_increase():
    """Test that a curve refuses non-increasing magnitudes."""
    with pytest.raises(ValueError):
        make_curve([0.5, 0.4], [0.1, 0.2])
    with pytest.raises(ValueError):
        CurvePoint(0.5, 0.1, "solved")


def test_compare_identical_curves():
    """Test a zero deviation for a curve compared with itself."""
    curve = make_curve([0.4, 0.5, 0.6], [0.2, 0.15, 0.1])
    result = compare_curves(curve, curve)

    assert result.max_abs == 0.0
    assert result.signs == "000"
    assert result.non_conservative == []


def test_compare_shifted_curve():
    """Test that a uniformly longer prediction is flagged non-conservative everywhere."""
    reference = make_curve([0.4, 0.5, 0.6], [0.2, 0.15, 0.1])
    predicted = make_curve([0.4, 0.5, 0.6], [0.21, 0.16, 0.11])

    result = compare_curves(predicted, reference)

    assert result.max_abs == pytest.approx(0.01)
    assert result.mean_abs == pytest.approx(0.01)
    assert result.signs == "+++"
    assert result.non_conservative == [0.4, 0.5, 0.6]
    assert result.to_dict()["n_common"] == 3


def test_compare_interpolates_and_skips_non_optimal_points():
    """Test comparison on a finer predicted grid with a never-critical point."""
    reference = make_curve([0.4, 0.6], [0.2, 0.1])
    predicted = make_curve(
        [0.3, 0.4, 0.5, 0.6], [0.25, 0.2, 0.14, 0.1], ["never-critical"] + ["optimal"] * 3
    )

    result = compare_curves(predicted, reference)

    np.testing.assert_allclose(result.delta_V, [0.4, 0.5, 0.6])
    assert result.signs == "0-0"
    assert result.max_abs == pytest.approx(0.01)


def test_compare_without_optimal_points():
    """Test that curves without common optimal points cannot be compared."""
    reference = make_curve([0.4, 0.5], [0.25, 0.25], ["never-critical", "never-critical"])
    predicted = make_curve([0.4, 0.5], [0.2, 0.15])

    with pytest.raises(CurveComparisonError):
        compare_curves(predicted, reference)


def test_curve_file_round_trip(tmp_path):
    """Test that statuses, nan durations and point errors survive a write and read."""
    curve = BoundaryCurve(
        kind="lvrt",
        parameter=0.05,
        points=[
            CurvePoint(0.4, 0.25, "never-critical", 0.25, 1.5),
            CurvePoint(0.5, 0.15, "optimal", 0.15, 2.0),
            CurvePoint(0.6, float("nan"), "failed", error="Node limit 10 reached"),
            CurvePoint(0.7, float("nan"), "infeasible"),
        ],
        bounds_source="lp-tightened",
        metadata={"model_hash": "abc"},
    )
    path = tmp_path / "curve.csv"
    write_curve(curve, path)

    loaded = read_curve(path)

    assert loaded.statuses == curve.statuses
    np.testing.assert_array_equal(loaded.delta_V, curve.delta_V)
    np.testing.assert_array_equal(loaded.delta_T[:2], curve.delta_T[:2])
    assert np.isnan(loaded.delta_T[2:]).all()
    assert loaded.points[2].error == "Node limit 10 reached"
    assert loaded.parameter == 0.05
    assert loaded.bounds_source == "lp-tightened"
    assert loaded.metadata == {"model_hash": "abc"}
    assert (tmp_path / "curve.json").exists()


def test_plot_table_joins_on_magnitude():
    """Test the wide table over the union of two grids."""
    milp = make_curve([0.4, 0.5], [0.2, 0.15])
    truth = make_curve([0.5, 0.6], [0.16, 0.1])

    table = plot_table([("milp", milp), ("truth", truth)])

    assert list(table.columns) == [
        "delta_V",
        "milp_delta_T",
        "milp_status",
        "truth_delta_T",
        "truth_status",
    ]
    assert list(table["delta_V"]) == [0.4, 0.5, 0.6]
    assert np.isnan(table["truth_delta_T"].iloc[0])
    assert table["milp_delta_T"].iloc[1] == 0.15


# ============================================================================
# Simulation reference
# ============================================================================


def test_ground_truth_curve_statuses(params):
    """Test never-critical, optimal and always-critical magnitudes of the simulator."""
    curve = ground_truth_curve(
        [0.25, 0.4, 0.8], Criterion.lvrt_entry(), params, horizon=0.3, bracket=(0.1, 0.25)
    )

    assert curve.statuses == ["never-critical", "optimal", "infeasible"]
    assert curve.delta_T[0] == 0.25
    # Closed form of the first-order voltage lag
    expected = params.T_m * math.log(0.4 / (0.4 - (1.0 - params.V_int)))
    assert curve.delta_T[1] == pytest.approx(expected, abs=2e-4)
    assert math.isnan(curve.delta_T[2])
    assert curve.bounds_source == "simulation"


def test_ground_truth_power_curve(params):
    """Test the simulated power boundary against the settled latched-power relation."""
    mu = 0.3
    curve = ground_truth_curve(
        [0.4, 0.6, 0.7],
        Criterion.power_fraction(mu),
        params,
        dt=0.01,
        horizon=2.0,
        bracket=(0.1, 0.25),
    )

    assert curve.kind == "power"
    assert curve.parameter == mu
    assert curve.statuses == ["never-critical", "optimal", "optimal"]
    # Settled power P_ext * f - R_c * |I|^2 with f latched at the nadir
    loss = params.R_c * (params.P_ext**2 + params.Q_ext**2)
    f = (params.P_ext - math.sqrt(params.P_ext**2 - 4 * loss * mu * params.P_ext)) / (2 * loss)
    nadir = params.V_min + f * (params.V_int - params.V_min) / params.c
    for delta_V, delta_T in zip(curve.delta_V[1:], curve.delta_T[1:], strict=True):
        expected = -params.T_m * math.log(1.0 - (1.0 - nadir) / delta_V)
        assert delta_T == pytest.approx(expected, abs=3e-4)


def test_trajectory_error_table(small_model, params):
    """Test one rmse and max_abs row per network output."""
    trajectory = integrate(
        find_equilibrium(params), DisturbanceSpec(0.5, 0.15), params, dt=0.01, horizon=0.5
    )

    table = trajectory_error(small_model, trajectory)

    assert table.shape == (14, 2)
    assert list(table.index) == list(small_model.output_names)
    assert (table["max_abs"] >= table["rmse"]).all()
