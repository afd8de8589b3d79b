"""Mixed-integer linear problem container and solution record."""

import copy
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

logger = logging.getLogger(__name__)

Sense = Literal["<=", "=", ">="]
LpStatus = Literal["optimal", "infeasible", "unbounded"]

SENSES: tuple[str, ...] = ("<=", "=", ">=")


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = float("inf")
    is_binary: bool = False


@dataclass
class Constraint:
    """Linear row ``sum(coefficients[i] * x_i) sense rhs``."""

    coefficients: dict[int, float]
    sense: Sense
    rhs: float
    name: str = ""


@dataclass
class LpSolution:
    """Result of an LP or MILP solve.

    Attributes:
        status: optimal, infeasible or unbounded
        objective: objective value in the problem's own sense (nan if not optimal)
        values: variable values (None if not optimal)
        duals: row duals of the LP, in the problem's own sense (None for MILPs)
        iterations: simplex pivots, summed over nodes for MILPs
        nodes: branch-and-bound nodes processed (0 for a plain LP)
    """

    status: LpStatus
    objective: float = float("nan")
    values: np.ndarray | None = None
    duals: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class MilpProblem:
    """Variables, rows, objective and the role of each encoded variable.

    ``inputs`` and ``outputs`` map network input/output names to variable
    names, so callers never depend on the naming scheme.
    """

    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    maximize: bool = True
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    @property
    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_binary]

    def add_variable(
        self, name: str, lower: float = 0.0, upper: float = float("inf"), binary: bool = False
    ) -> int:
        if name in self._index:
            raise ValueError(f"Duplicate variable name: {name}")
        if binary:
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ValueError(f"Variable {name}: lower {lower} > upper {upper}")
        self.variables.append(Variable(name, float(lower), float(upper), binary))
        self._index[name] = len(self.variables) - 1
        return self._index[name]

    def add_constraint(
        self, coefficients: dict[int, float], sense: Sense, rhs: float, name: str = ""
    ) -> int:
        if sense not in SENSES:
            raise ValueError(f"Unknown constraint sense: {sense}")
        for i in coefficients:
            if not 0 <= i < self.n_vars:
                raise ValueError(
                    f"Constraint {name or len(self.constraints)} references undeclared variable {i}"
                )
        row = {i: float(c) for i, c in coefficients.items() if c != 0.0}
        self.constraints.append(
            Constraint(row, sense, float(rhs), name or f"c{len(self.constraints)}")
        )
        return len(self.constraints) - 1

    def set_objective(self, coefficients: dict[int, float], maximize: bool = True) -> None:
        self.objective = {i: float(c) for i, c in coefficients.items() if c != 0.0}
        self.maximize = maximize

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"Unknown variable: {name}") from None

    def input_index(self, name: str) -> int:
        return self.index(self.inputs[name])

    def output_index(self, name: str) -> int:
        return self.index(self.outputs[name])

    def value(self, solution: LpSolution, name: str) -> float:
        """Value of a variable, input or output name in a solution."""
        if solution.values is None:
            raise ValueError(f"Solution has status {solution.status} and no values")
        if name in self.outputs:
            name = self.outputs[name]
        elif name in self.inputs:
            name = self.inputs[name]
        return float(solution.values[self.index(name)])

    def copy(self) -> "MilpProblem":
        return copy.deepcopy(self)

    def relaxed(self) -> "MilpProblem":
        """Copy with every binary turned into a continuous [0, 1] variable."""
        relaxed = self.copy()
        for var in relaxed.variables:
            var.is_binary = False
        return relaxed

    def set_bounds(self, name: str, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError(f"Variable {name}: lower {lower} > upper {upper}")
        var = self.variables[self.index(name)]
        var.lower, var.upper = float(lower), float(upper)

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return lower, upper

    def dense(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        """Dense row matrix, senses and right-hand sides."""
        a = np.zeros((self.n_rows, self.n_vars))
        for r, con in enumerate(self.constraints):
            for i, c in con.coefficients.items():
                a[r, i] = c
        return a, [c.sense for c in self.constraints], np.array([c.rhs for c in self.constraints])

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for i, v in self.objective.items():
            c[i] = v
        return c

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of a point, relative to 1 + |rhs|."""
        lower, upper = self.bounds_arrays()
        worst = float(max(np.max(lower - x, initial=0.0), np.max(x - upper, initial=0.0)))
        if self.n_rows:
            a, senses, b = self.dense()
            activity = a @ x
            for r, sense in enumerate(senses):
                gap = activity[r] - b[r]
                if sense == "<=":
                    viol = max(gap, 0.0)
                elif sense == ">=":
                    viol = max(-gap, 0.0)
                else:
                    viol = abs(gap)
                worst = max(worst, viol / (1.0 + abs(b[r])))
        return worst

    def to_dict(self) -> dict:
        """JSON-serializable snapshot; infinite bounds become None."""

        def bound(v: float) -> float | None:
            return None if np.isinf(v) else v

        return {
            "maximize": self.maximize,
            "variables": [
                {
                    "name": v.name,
                    "lower": bound(v.lower),
                    "upper": bound(v.upper),
                    "binary": v.is_binary,
                }
                for v in self.variables
            ],
            "constraints": [
                {
                    "name": c.name,
                    "coefficients": {self.variables[i].name: a for i, a in c.coefficients.items()},
                    "sense": c.sense,
                    "rhs": c.rhs,
                }
                for c in self.constraints
            ],
            "objective": {self.variables[i].name: a for i, a in self.objective.items()},
            "inputs": dict(self.inputs),
            "outputs": dict(self.outputs),
        }


def fix_inputs(problem: MilpProblem, values: dict[str, float]) -> MilpProblem:
    """Copy of the problem with the named network inputs pinned.

    Args:
        problem: Encoded network
        values: Input name (``t``, ``delta_V``, ``delta_T``) to value

    Raises:
        KeyError: For an unknown input name
    """
    fixed = problem.copy()
    for name, value in values.items():
        if name not in fixed.inputs:
            raise KeyError(f"Unknown network input: {name}")
        fixed.set_bounds(fixed.inputs[name], value, value)
    return fixed
