"""Boundary problems on trained networks and their comparison with simulation."""

from lvrt_pinn.analysis.boundary import (
    build_query_problem,
    solve_lvrt,
    solve_output_extremum,
    solve_power,
    solve_query,
    sweep,
)
from lvrt_pinn.analysis.ground_truth import ground_truth_curve, trajectory_error
from lvrt_pinn.analysis.models import (
    BoundaryCurve,
    BoundaryQuery,
    BoundarySolution,
    CurveComparison,
    CurvePoint,
    ExtremumResult,
)
from lvrt_pinn.analysis.reports import compare_curves, plot_table, read_curve, write_curve

__all__ = [
    "BoundaryCurve",
    "BoundaryQuery",
    "BoundarySolution",
    "CurveComparison",
    "CurvePoint",
    "ExtremumResult",
    "build_query_problem",
    "compare_curves",
    "ground_truth_curve",
    "plot_table",
    "read_curve",
    "solve_lvrt",
    "solve_output_extremum",
    "solve_power",
    "solve_query",
    "sweep",
    "trajectory_error",
]
