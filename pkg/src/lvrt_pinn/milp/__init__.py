"""Exact MILP encoding of ReLU networks and the solvers that optimise over it."""

from lvrt_pinn.milp.bounds import (
    NeuronBounds,
    check_bounds_cover,
    interval_bounds,
    read_bounds,
    write_bounds,
)
from lvrt_pinn.milp.branch_and_bound import branch_and_bound
from lvrt_pinn.milp.encoding import encode, encode_prefix
from lvrt_pinn.milp.lp_format import export_lp_file, format_lp
from lvrt_pinn.milp.problem import Constraint, LpSolution, MilpProblem, Variable, fix_inputs
from lvrt_pinn.milp.simplex import simplex_solve, solve_arrays, solve_lp
from lvrt_pinn.milp.tightening import tighten_bounds_lp

__all__ = [
    "Constraint",
    "LpSolution",
    "MilpProblem",
    "NeuronBounds",
    "Variable",
    "branch_and_bound",
    "check_bounds_cover",
    "encode",
    "encode_prefix",
    "export_lp_file",
    "fix_inputs",
    "format_lp",
    "interval_bounds",
    "read_bounds",
    "simplex_solve",
    "solve_arrays",
    "solve_lp",
    "tighten_bounds_lp",
    "write_bounds",
]
