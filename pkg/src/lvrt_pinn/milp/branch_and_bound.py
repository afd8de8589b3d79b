"""Best-first branch-and-bound over the simplex LP relaxation."""

import heapq
import itertools
import logging
from typing import Literal

import numpy as np
from tqdm import tqdm

from lvrt_pinn.errors import NodeLimitError
from lvrt_pinn.milp.problem import LpSolution, MilpProblem
from lvrt_pinn.milp.simplex import solve_arrays

logger = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6
GAP_TOL = 1e-6
DEFAULT_NODE_LIMIT = 1_000_000

BranchRule = Literal["most-fractional", "first-fractional"]


def _select_branch(values: np.ndarray, binaries: np.ndarray, rule: BranchRule) -> int | None:
    frac = np.abs(values[binaries] - np.round(values[binaries]))
    fractional = frac > INTEGRALITY_TOL
    if not fractional.any():
        return None
    if rule == "first-fractional":
        return int(binaries[np.argmax(fractional)])
    # Distance to the nearest integer; argmax keeps the lowest index on ties
    return int(binaries[np.argmax(np.where(fractional, frac, -1.0))])


def branch_and_bound(
    problem: MilpProblem,
    node_limit: int = DEFAULT_NODE_LIMIT,
    branch_rule: BranchRule = "most-fractional",
    show_progress: bool = False,
) -> LpSolution:
    """Solve a MILP with binary variables to proven optimality.

    Nodes are processed best bound first; ties go to the node created first.
    A node is pruned when its LP bound does not beat the incumbent by more
    than the absolute gap tolerance.

    Args:
        problem: MILP whose integer variables are all binary
        node_limit: Maximum number of processed nodes
        branch_rule: Most fractional binary, or the first fractional one
        show_progress: Show a tqdm counter of processed nodes

    Returns:
        LpSolution with status optimal, infeasible or unbounded

    Raises:
        NodeLimitError: If the limit is hit with open nodes left, carrying the
            incumbent (or None) and the best open bound
    """
    a, senses, b = problem.dense()
    root_lower, root_upper = problem.bounds_arrays()
    c = problem.objective_vector()
    binaries = np.array(problem.binary_indices, dtype=int)
    sign = 1.0 if problem.maximize else -1.0

    counter = itertools.count()
    # Entries: (-sign * parent bound, creation order, fixings)
    heap: list[tuple[float, int, tuple[tuple[int, float], ...]]] = [(-np.inf, next(counter), ())]
    incumbent: LpSolution | None = None
    nodes = 0
    iterations = 0

    progress = tqdm(desc="Branch and bound", unit="node", disable=not show_progress)
    try:
        while heap:
            priority, _, fixings = heapq.heappop(heap)
            parent_bound = -priority
            if incumbent is not None and parent_bound <= sign * incumbent.objective + GAP_TOL:
                continue
            if nodes >= node_limit:
                best_open = max([parent_bound] + [-p for p, _, _ in heap])
                raise NodeLimitError(
                    f"Node limit {node_limit} reached with open nodes",
                    operation="milp.branch_and_bound",
                    incumbent=incumbent,
                    bound=sign * best_open,
                )
            nodes += 1
            progress.update(1)

            lower, upper = root_lower.copy(), root_upper.copy()
            for idx, value in fixings:
                lower[idx] = upper[idx] = value
            relaxation = solve_arrays(c, a, senses, b, lower, upper, maximize=problem.maximize)
            iterations += relaxation.iterations
            if relaxation.status == "unbounded":
                if not fixings:
                    return LpSolution("unbounded", iterations=iterations, nodes=nodes)
                continue
            if relaxation.status != "optimal":
                continue
            bound = sign * relaxation.objective
            if incumbent is not None and bound <= sign * incumbent.objective + GAP_TOL:
                continue

            branch_var = (
                _select_branch(relaxation.values, binaries, branch_rule) if len(binaries) else None
            )
            if branch_var is None:
                values = relaxation.values.copy()
                values[binaries] = np.round(values[binaries])
                incumbent = LpSolution("optimal", relaxation.objective, values, None)
                logger.debug(f"New incumbent {relaxation.objective:.9g} at node {nodes}")
                continue
            for value in (0.0, 1.0):
                heapq.heappush(heap, (-bound, next(counter), fixings + ((branch_var, value),)))
    finally:
        progress.close()

    if incumbent is None:
        return LpSolution("infeasible", iterations=iterations, nodes=nodes)
    incumbent.iterations = iterations
    incumbent.nodes = nodes
    logger.debug(
        f"Branch and bound finished: objective {incumbent.objective:.9g} after {nodes} nodes",
        extra={"pipeline_event": "branch_and_bound", "nodes": nodes},
    )
    return incumbent
