"""Simulator reference curves and network-versus-simulation errors."""

import logging
import time
from collections.abc import Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from lvrt_pinn.analysis.models import BoundaryCurve, CurvePoint
from lvrt_pinn.dynamics import (
    ConverterParams,
    Criterion,
    Trajectory,
    critical_duration,
    find_equilibrium,
)
from lvrt_pinn.pinn import MlpModel, forward

logger = logging.getLogger(__name__)

_STATUS = {
    "optimal": "optimal",
    "never-critical": "never-critical",
    "always-critical": "infeasible",
}


def ground_truth_curve(
    delta_V_grid: Sequence[float],
    criterion: Criterion,
    params: ConverterParams,
    dt: float = 1e-3,
    horizon: float = 1.0,
    bracket: tuple[float, float] = (0.0, 0.25),
    tol: float = 1e-4,
    show_progress: bool = False,
) -> BoundaryCurve:
    """Critical durations of the simulated converter, one bisection per magnitude.

    Always-critical magnitudes are reported as ``infeasible`` so the curve
    shares the status vocabulary of the MILP sweeps.

    Raises:
        ValueError: On a non-increasing grid or an invalid bracket
        NonMonotoneCriterionError: If a point is critical only for short dips
    """
    grid = np.asarray(delta_V_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("delta_V grid must be non-empty and strictly increasing")
    x0 = find_equilibrium(params, V_t=1.0)
    points = []
    for dv in tqdm(grid, desc="Ground truth", unit="point", disable=not show_progress):
        start = time.perf_counter()
        result = critical_duration(
            float(dv), criterion, params, dt, horizon, bracket, x0=x0, tol=tol
        )
        status = _STATUS[result.status]
        delta_T = result.delta_T if status != "infeasible" else float("nan")
        points.append(
            CurvePoint(float(dv), delta_T, status, delta_T, (time.perf_counter() - start) * 1e3)
        )

    parameter = 0.0 if criterion.kind == "lvrt" else criterion.mu
    logger.info(
        f"Ground truth {criterion.kind} curve over {len(points)} magnitudes",
        extra={"pipeline_event": "ground_truth", "kind": criterion.kind},
    )
    return BoundaryCurve(
        kind=criterion.kind,
        parameter=parameter,
        points=points,
        bounds_source="simulation",
        metadata={
            "kind": criterion.kind,
            "parameter": parameter,
            "bounds_source": "simulation",
            "params": params.to_dict(),
            "dt": dt,
            "horizon": horizon,
            "bracket": list(bracket),
            "tol": tol,
        },
    )


def trajectory_error(model: MlpModel, trajectory: Trajectory) -> pd.DataFrame:
    """Per-output RMSE and maximum absolute error of the network on a trajectory.

    Returns:
        DataFrame indexed by output name with columns ``rmse`` and ``max_abs``
    """
    n = len(trajectory)
    dist = trajectory.disturbance
    inputs = np.column_stack([trajectory.times, np.full(n, dist.delta_V), np.full(n, dist.delta_T)])
    predicted = forward(model, inputs)
    reference = np.column_stack([trajectory.column(name) for name in model.output_names])
    error = predicted - reference
    return pd.DataFrame(
        {"rmse": np.sqrt(np.mean(error**2, axis=0)), "max_abs": np.max(np.abs(error), axis=0)},
        index=pd.Index(model.output_names, name="output"),
    )
