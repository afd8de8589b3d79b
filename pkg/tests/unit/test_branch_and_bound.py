"""Unit tests for branch and bound."""

import itertools

import numpy as np
import pytest

from lvrt_pinn.errors import NodeLimitError
from lvrt_pinn.milp import MilpProblem, branch_and_bound


def knapsack(values, weights, capacity) -> MilpProblem:
    """Binary knapsack with one continuous filler variable of low value."""
    problem = MilpProblem()
    items = [problem.add_variable(f"b{i}", binary=True) for i in range(len(values))]
    filler = problem.add_variable("filler", 0.0, 1.0)
    row = {i: w for i, w in zip(items, weights, strict=True)}
    row[filler] = 1.0
    problem.add_constraint(row, "<=", capacity, name="capacity")
    objective = {i: v for i, v in zip(items, values, strict=True)}
    objective[filler] = 0.1
    problem.set_objective(objective, maximize=True)
    return problem


def enumerate_knapsack(values, weights, capacity) -> float:
    best = -np.inf
    for choice in itertools.product((0, 1), repeat=len(values)):
        used = float(np.dot(choice, weights))
        if used <= capacity + 1e-12:
            best = max(best, float(np.dot(choice, values)) + 0.1 * min(1.0, capacity - used))
    return best


# ============================================================================
# Optimality
# ============================================================================


@pytest.mark.parametrize("seed", range(5))
def test_matches_full_enumeration(seed):
    """Test random six-item knapsacks against all 64 assignments."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(1.0, 10.0, size=6).round(3)
    weights = rng.uniform(1.0, 6.0, size=6).round(3)
    capacity = float(weights.sum() / 2)
    problem = knapsack(values, weights, capacity)

    result = branch_and_bound(problem)

    assert result.status == "optimal"
    assert result.objective == pytest.approx(
        enumerate_knapsack(values, weights, capacity), abs=1e-6
    )
    assert set(np.round(result.values[problem.binary_indices], 12)) <= {0.0, 1.0}
    assert problem.max_violation(result.values) < 1e-7


def test_branch_rules_agree():
    """Test that both branching rules reach the same optimum."""
    problem = knapsack([5.0, 4.0, 3.0, 7.0, 2.5], [4.0, 3.0, 2.0, 5.0, 1.5], 7.5)

    most = branch_and_bound(problem, branch_rule="most-fractional")
    first = branch_and_bound(problem, branch_rule="first-fractional")

    assert most.objective == pytest.approx(first.objective, abs=1e-6)


def test_integral_root_needs_one_node():
    """Test that an integral LP relaxation is accepted at the root."""
    problem = MilpProblem()
    b = problem.add_variable("b", binary=True)
    x = problem.add_variable("x", 0.0, 2.0)
    problem.add_constraint({x: 1.0, b: -1.0}, "<=", 1.0)
    problem.set_objective({x: 1.0, b: 1.0}, maximize=True)

    result = branch_and_bound(problem)

    assert result.nodes == 1
    assert result.objective == pytest.approx(3.0)


def test_minimisation_sense():
    """Test a minimisation with a fractional relaxation."""
    problem = MilpProblem()
    b1 = problem.add_variable("b1", binary=True)
    b2 = problem.add_variable("b2", binary=True)
    problem.add_constraint({b1: 2.0, b2: 2.0}, ">=", 1.0)
    problem.set_objective({b1: 3.0, b2: 2.0}, maximize=False)

    result = branch_and_bound(problem)

    assert result.objective == pytest.approx(2.0)
    assert problem.value(result, "b2") == 1.0


# ============================================================================
# Infeasible, unbounded and limits
# ============================================================================


def test_integer_infeasible_problem():
    """Test a problem whose relaxation is feasible but no binary point is."""
    problem = MilpProblem()
    b1 = problem.add_variable("b1", binary=True)
    b2 = problem.add_variable("b2", binary=True)
    problem.add_constraint({b1: 1.0, b2: 1.0}, "=", 1.5)
    problem.set_objective({b1: 1.0}, maximize=True)

    result = branch_and_bound(problem)

    assert result.status == "infeasible"
    assert result.nodes >= 3


def test_unbounded_root():
    """Test that an unbounded relaxation is reported as unbounded."""
    problem = MilpProblem()
    problem.add_variable("b", binary=True)
    x = problem.add_variable("x", 0.0)
    problem.set_objective({x: 1.0}, maximize=True)

    assert branch_and_bound(problem).status == "unbounded"


def test_node_limit_reports_bound():
    """Test that hitting the node limit raises with the best open bound."""
    problem = knapsack([5.0, 4.0, 3.0, 7.0, 2.5], [4.0, 3.0, 2.0, 5.0, 1.5], 7.5)

    with pytest.raises(NodeLimitError) as exc_info:
        branch_and_bound(problem, node_limit=1)

    error = exc_info.value
    optimum = branch_and_bound(problem).objective
    assert error.bound >= optimum - 1e-6
    assert error.operation == "milp.branch_and_bound"
