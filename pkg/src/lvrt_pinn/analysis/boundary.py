"""Boundary problems on the encoded network and sweeps over dip magnitudes."""

import logging
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
from tqdm import tqdm

from lvrt_pinn.analysis.models import (
    BoundaryCurve,
    BoundaryKind,
    BoundaryQuery,
    BoundarySolution,
    CurvePoint,
    ExtremumResult,
)
from lvrt_pinn.dataset import InputBox
from lvrt_pinn.dynamics import ConverterParams
from lvrt_pinn.errors import LvrtPinnError
from lvrt_pinn.milp import MilpProblem, NeuronBounds, branch_and_bound, encode, fix_inputs
from lvrt_pinn.milp.branch_and_bound import DEFAULT_NODE_LIMIT
from lvrt_pinn.pinn import MlpModel, model_hash

logger = logging.getLogger(__name__)

POWER_TIME = 1.0
BOX_TOLERANCE = 1e-6


def _input_range(problem: MilpProblem, name: str) -> tuple[float, float]:
    var = problem.variables[problem.input_index(name)]
    return var.lower, var.upper


def _check_delta_V(problem: MilpProblem, delta_V: float) -> None:
    lo, hi = _input_range(problem, "delta_V")
    if not lo - BOX_TOLERANCE <= delta_V <= hi + BOX_TOLERANCE:
        raise ValueError(f"delta_V={delta_V} lies outside the encoded box [{lo}, {hi}]")


def build_query_problem(
    base: MilpProblem, kind: BoundaryKind, parameter: float, delta_V: float, params: ConverterParams
) -> tuple[MilpProblem, str]:
    """Copy of an encoding with the boundary rows of one query and objective max delta_T.

    Returns:
        The query problem and the name of the constrained output
    """
    _check_delta_V(base, delta_V)
    problem = fix_inputs(base, {"delta_V": delta_V})
    t, dT = problem.input_index("t"), problem.input_index("delta_T")
    if kind == "lvrt":
        output = "V_meas"
        problem.add_constraint(
            {problem.output_index(output): 1.0}, ">=", params.V_int + parameter, name="lvrt_margin"
        )
        # The nadir occurs right before clearing
        problem.add_constraint({t: 1.0, dT: -1.0}, "=", 0.0, name="t_at_clearing")
    elif kind == "power":
        output = "P_total"
        lo, hi = _input_range(problem, "t")
        if not lo <= POWER_TIME <= hi:
            raise ValueError(f"t = {POWER_TIME} s lies outside the encoded box [{lo}, {hi}]")
        problem.set_bounds(problem.inputs["t"], POWER_TIME, POWER_TIME)
        problem.add_constraint(
            {problem.output_index(output): 1.0}, ">=", parameter * params.P_ext, name="power_floor"
        )
    else:
        raise ValueError(f"Unknown boundary kind: {kind}")
    problem.set_objective({dT: 1.0}, maximize=True)
    return problem, output


def _solve_query(
    base: MilpProblem,
    kind: BoundaryKind,
    parameter: float,
    delta_V: float,
    params: ConverterParams,
    node_limit: int,
) -> BoundarySolution:
    problem, output = build_query_problem(base, kind, parameter, delta_V, params)
    start = time.perf_counter()
    solution = branch_and_bound(problem, node_limit=node_limit)
    solve_ms = (time.perf_counter() - start) * 1e3
    if not solution.is_optimal:
        return BoundarySolution("infeasible", float("nan"), solve_ms, solution)

    delta_T = problem.value(solution, "delta_T")
    _, dT_max = _input_range(problem, "delta_T")
    status = "never-critical" if delta_T >= dT_max - BOX_TOLERANCE else "optimal"
    return BoundarySolution(status, delta_T, solve_ms, solution, problem.value(solution, output))


def solve_lvrt(
    model: MlpModel,
    bounds: NeuronBounds,
    delta_V: float,
    epsilon: float = 0.0,
    params: ConverterParams | None = None,
    box: InputBox | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> BoundarySolution:
    """Longest dip at magnitude delta_V keeping the predicted V_meas above V_int + epsilon.

    The voltage is checked at t = delta_T, the instant just before clearing.

    Args:
        model: Trained network
        bounds: Neuron bounds covering ``box``
        delta_V: Dip magnitude, inside the input box [pu]
        epsilon: Safety margin above V_int [pu]
        params: Converter parameters supplying V_int
        box: Raw input box, None for the box of ``bounds``
        node_limit: Branch-and-bound node limit

    Returns:
        BoundarySolution; ``never-critical`` when delta_T reaches its box maximum

    Raises:
        NodeLimitError: If branch and bound runs out of nodes
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    params = params or ConverterParams()
    return _solve_query(encode(model, box, bounds), "lvrt", epsilon, delta_V, params, node_limit)


def solve_power(
    model: MlpModel,
    bounds: NeuronBounds,
    delta_V: float,
    mu: float,
    params: ConverterParams | None = None,
    box: InputBox | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> BoundarySolution:
    """Longest dip at magnitude delta_V keeping P_total at t = 1 s above mu * P_ext."""
    if not 0 <= mu <= 1:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    params = params or ConverterParams()
    return _solve_query(encode(model, box, bounds), "power", mu, delta_V, params, node_limit)


def solve_output_extremum(
    model: MlpModel,
    bounds: NeuronBounds,
    output: str,
    sense: Literal["max", "min"] = "min",
    fixed: dict[str, float] | None = None,
    box: InputBox | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> ExtremumResult:
    """Maximise or minimise one network output with some inputs pinned.

    For example the predicted voltage nadir of a given disturbance is
    ``solve_output_extremum(model, bounds, "V_meas", "min", {"delta_V": 0.5, "delta_T": 0.15})``.
    """
    if sense not in ("max", "min"):
        raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
    problem = encode(model, box, bounds)
    if output not in problem.outputs:
        raise KeyError(f"Model has no output named {output!r}")
    if fixed:
        problem = fix_inputs(problem, fixed)
    problem.set_objective({problem.output_index(output): 1.0}, maximize=sense == "max")
    solution = branch_and_bound(problem, node_limit=node_limit)
    if not solution.is_optimal:
        return ExtremumResult(solution.status, float("nan"), {}, solution)
    inputs = {name: problem.value(solution, name) for name in problem.inputs}
    return ExtremumResult("optimal", solution.objective, inputs, solution)


def sweep(
    model: MlpModel,
    bounds: NeuronBounds,
    kind: BoundaryKind,
    parameter: float,
    delta_V_grid: Sequence[float],
    params: ConverterParams | None = None,
    box: InputBox | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
    workers: int = 1,
    show_progress: bool = False,
) -> BoundaryCurve:
    """Solve one boundary problem per dip magnitude.

    The network is encoded once and every point works on its own copy. A
    point whose solve raises a package error is recorded with status
    ``failed`` and the sweep continues.

    Args:
        model: Trained network
        bounds: Neuron bounds, reused for every point
        kind: ``"lvrt"`` or ``"power"``
        parameter: epsilon for lvrt, mu for power
        delta_V_grid: Strictly increasing dip magnitudes [pu]
        params: Converter parameters
        box: Raw input box, None for the box of ``bounds``
        node_limit: Branch-and-bound node limit per point
        workers: Thread count; results are assembled in grid order
        show_progress: Show a tqdm bar

    Returns:
        BoundaryCurve with one point per grid value
    """
    grid = np.asarray(delta_V_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("delta_V grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("delta_V grid must be strictly increasing")
    if kind == "lvrt" and parameter < 0:
        raise ValueError(f"epsilon must be non-negative, got {parameter}")
    if kind == "power" and not 0 <= parameter <= 1:
        raise ValueError(f"mu must lie in [0, 1], got {parameter}")
    params = params or ConverterParams()
    base = encode(model, box, bounds)
    for dv in grid:
        _check_delta_V(base, float(dv))

    def solve_point(delta_V: float) -> CurvePoint:
        try:
            result = _solve_query(base, kind, parameter, delta_V, params, node_limit)
        except LvrtPinnError as e:
            logger.warning(f"Boundary point delta_V={delta_V} failed in {e.operation}: {e}")
            return CurvePoint(delta_V, float("nan"), "failed", error=str(e))
        return CurvePoint(
            delta_V, result.delta_T, result.status, result.solution.objective, result.solve_ms
        )

    values = [float(v) for v in grid]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        points = list(
            tqdm(
                pool.map(solve_point, values),
                total=len(values),
                desc=f"{kind} boundary",
                unit="point",
                disable=not show_progress,
            )
        )

    failed = sum(p.status == "failed" for p in points)
    logger.info(
        f"Swept {len(points)} {kind} boundary points (parameter={parameter}): "
        f"{sum(p.status == 'optimal' for p in points)} optimal, {failed} failed",
        extra={"pipeline_event": "sweep", "kind": kind, "failed": failed},
    )
    if box is None:
        lower, upper = bounds.input_lower, bounds.input_upper
    else:
        lower, upper = box.lower, box.upper
    return BoundaryCurve(
        kind=kind,
        parameter=float(parameter),
        points=points,
        bounds_source=bounds.source,
        metadata={
            "model_hash": model_hash(model),
            "kind": kind,
            "parameter": float(parameter),
            "bounds_source": bounds.source,
            "input_lower": np.asarray(lower).tolist(),
            "input_upper": np.asarray(upper).tolist(),
            "node_limit": node_limit,
        },
    )


def solve_query(
    model: MlpModel,
    bounds: NeuronBounds,
    query: BoundaryQuery,
    params: ConverterParams | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> BoundarySolution:
    """Dispatch a BoundaryQuery to ``solve_lvrt`` or ``solve_power``."""
    if query.bounds_source != bounds.source:
        logger.warning(
            f"Query asks for {query.bounds_source} bounds, solving with {bounds.source} bounds"
        )
    if query.kind == "lvrt":
        return solve_lvrt(
            model, bounds, query.delta_V, query.parameter, params, query.box, node_limit
        )
    return solve_power(model, bounds, query.delta_V, query.parameter, params, query.box, node_limit)
