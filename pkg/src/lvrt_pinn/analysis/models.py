"""Data models for boundary queries, curves and their comparison."""

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import pandas as pd

from lvrt_pinn.dataset import InputBox
from lvrt_pinn.milp.problem import LpSolution

BoundaryKind = Literal["lvrt", "power"]
PointStatus = Literal["optimal", "never-critical", "infeasible", "failed"]

POINT_STATUSES: tuple[str, ...] = ("optimal", "never-critical", "infeasible", "failed")


@dataclass(frozen=True)
class BoundaryQuery:
    """One boundary problem at a fixed dip magnitude.

    Attributes:
        kind: ``"lvrt"`` (keep V_meas above V_int + epsilon) or ``"power"``
            (keep P_total at t = 1 s above mu * P_ext)
        parameter: epsilon [pu] for lvrt, mu [fraction] for power
        delta_V: dip magnitude [pu]
        box: raw input box, None for the model's training box
        bounds_source: origin of the neuron bounds used as big-M constants
    """

    kind: BoundaryKind
    parameter: float
    delta_V: float
    box: InputBox | None = None
    bounds_source: str = "interval"

    def __post_init__(self):
        if self.kind not in ("lvrt", "power"):
            raise ValueError(f"Unknown boundary kind: {self.kind}")
        if self.kind == "lvrt" and self.parameter < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.parameter}")
        if self.kind == "power" and not 0 <= self.parameter <= 1:
            raise ValueError(f"mu must lie in [0, 1], got {self.parameter}")
        if self.box is not None and not self.box.delta_V[0] <= self.delta_V <= self.box.delta_V[1]:
            raise ValueError(
                f"delta_V={self.delta_V} lies outside the input box {self.box.delta_V}"
            )


@dataclass
class BoundarySolution:
    """Outcome of one boundary MILP.

    Attributes:
        status: optimal, never-critical (the duration hit its box maximum) or
            infeasible (critical even at the shortest duration)
        delta_T: maximal admissible duration [s], nan when infeasible
        solve_ms: wall-clock time of the branch-and-bound solve
        solution: raw MILP solution
        constrained_value: network prediction of the constrained output at
            the optimum (V_meas or P_total)
    """

    status: PointStatus
    delta_T: float
    solve_ms: float
    solution: LpSolution
    constrained_value: float = float("nan")

    @property
    def nodes(self) -> int:
        return self.solution.nodes


@dataclass
class ExtremumResult:
    """Extreme value of one network output over the encoded input box."""

    status: str
    value: float
    inputs: dict[str, float]
    solution: LpSolution


@dataclass
class CurvePoint:
    delta_V: float
    delta_T: float
    status: PointStatus
    objective: float = float("nan")
    solve_ms: float = 0.0
    error: str = ""

    def __post_init__(self):
        if self.status not in POINT_STATUSES:
            raise ValueError(f"Unknown point status: {self.status}")


@dataclass
class BoundaryCurve:
    """Critical duration as a function of the dip magnitude.

    Attributes:
        kind: boundary kind the curve answers
        parameter: epsilon or mu of the sweep
        points: one entry per dip magnitude, strictly increasing in delta_V
        bounds_source: ``interval``, ``lp-tightened`` or ``simulation``
        metadata: model hash, query definition and run configuration
    """

    kind: BoundaryKind
    parameter: float
    points: list[CurvePoint]
    bounds_source: str = "interval"
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        dv = self.delta_V
        if len(dv) > 1 and np.any(np.diff(dv) <= 0):
            raise ValueError("Curve points must be strictly increasing in delta_V")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def delta_V(self) -> np.ndarray:
        return np.array([p.delta_V for p in self.points], dtype=float)

    @property
    def delta_T(self) -> np.ndarray:
        return np.array([p.delta_T for p in self.points], dtype=float)

    @property
    def statuses(self) -> list[str]:
        return [p.status for p in self.points]

    def optimal(self) -> tuple[np.ndarray, np.ndarray]:
        """(delta_V, delta_T) of the optimal points only."""
        mask = np.array([p.status == "optimal" for p in self.points], dtype=bool)
        return self.delta_V[mask], self.delta_T[mask]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "delta_V": self.delta_V,
                "delta_T": self.delta_T,
                "status": self.statuses,
                "objective": [p.objective for p in self.points],
                "solve_ms": [p.solve_ms for p in self.points],
                "bounds_source": self.bounds_source,
                "param": self.parameter,
            }
        )


@dataclass
class CurveComparison:
    """Deviation of a predicted curve from a reference over common optimal points.

    ``differences`` holds predicted minus reference durations; a positive
    entry is non-conservative.
    """

    delta_V: np.ndarray
    differences: np.ndarray
    max_abs: float
    mean_abs: float
    non_conservative: list[float]

    @property
    def signs(self) -> str:
        """One character per common point: ``+``, ``-`` or ``0``."""
        return "".join("+" if d > 0 else "-" if d < 0 else "0" for d in self.differences)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_common": int(len(self.delta_V)),
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "signs": self.signs,
            "non_conservative": list(self.non_conservative),
        }
