"""Ground-truth converter model: equations, integrator and boundary search."""

from lvrt_pinn.dynamics.boundary import CriticalDuration, Criterion, critical_duration
from lvrt_pinn.dynamics.integrate import (
    TRAJECTORY_COLUMNS,
    Trajectory,
    integrate,
    read_trajectory_csv,
    simulate_batch,
    write_trajectory_csv,
)
from lvrt_pinn.dynamics.model import (
    ALGEBRAIC_NAMES,
    OUTPUT_NAMES,
    STATE_NAMES,
    AlgebraicVars,
    ConverterState,
    algebraic_eval,
    find_equilibrium,
    lvrt_factor,
    rhs,
)
from lvrt_pinn.dynamics.params import ConverterParams, DisturbanceSpec

__all__ = [
    "ALGEBRAIC_NAMES",
    "OUTPUT_NAMES",
    "STATE_NAMES",
    "TRAJECTORY_COLUMNS",
    "AlgebraicVars",
    "ConverterParams",
    "ConverterState",
    "CriticalDuration",
    "Criterion",
    "DisturbanceSpec",
    "Trajectory",
    "algebraic_eval",
    "critical_duration",
    "find_equilibrium",
    "integrate",
    "lvrt_factor",
    "read_trajectory_csv",
    "rhs",
    "simulate_batch",
    "write_trajectory_csv",
]
