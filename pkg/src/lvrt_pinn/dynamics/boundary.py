"""Bisection search for the critical disturbance duration."""

import logging
from dataclasses import dataclass
from typing import Literal

from lvrt_pinn.dynamics.integrate import Trajectory, integrate
from lvrt_pinn.dynamics.model import ConverterState, find_equilibrium
from lvrt_pinn.dynamics.params import ConverterParams, DisturbanceSpec
from lvrt_pinn.errors import NonMonotoneCriterionError

logger = logging.getLogger(__name__)

BISECTION_TOLERANCE = 1e-4

CriticalStatus = Literal["optimal", "never-critical", "always-critical"]


@dataclass(frozen=True)
class Criterion:
    """Condition that makes a disturbance critical.

    Attributes:
        kind: ``"lvrt"`` (V_meas nadir below V_int) or ``"power"``
            (final P_total below mu * P_ext)
        mu: required post-fault power fraction, used by ``"power"``
    """

    kind: Literal["lvrt", "power"] = "lvrt"
    mu: float = 0.6

    def __post_init__(self):
        if self.kind not in ("lvrt", "power"):
            raise ValueError(f"Unknown criterion kind: {self.kind}")
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")

    @classmethod
    def lvrt_entry(cls) -> "Criterion":
        return cls(kind="lvrt")

    @classmethod
    def power_fraction(cls, mu: float) -> "Criterion":
        return cls(kind="power", mu=mu)

    def is_critical(self, trajectory: Trajectory, params: ConverterParams) -> bool:
        if self.kind == "lvrt":
            return trajectory.min_v_meas < params.V_int
        return trajectory.final("P_total") < self.mu * params.P_ext


@dataclass(frozen=True)
class CriticalDuration:
    """Outcome of a critical-duration search.

    ``delta_T`` is the bisection midpoint when ``status == "optimal"``, the
    upper bracket end when never critical and the lower end when always
    critical.
    """

    status: CriticalStatus
    delta_T: float
    evaluations: int = 0


def critical_duration(
    delta_V: float,
    criterion: Criterion,
    params: ConverterParams,
    dt: float = 1e-3,
    horizon: float = 1.0,
    bracket: tuple[float, float] = (0.0, 0.25),
    x0: ConverterState | None = None,
    tol: float = BISECTION_TOLERANCE,
) -> CriticalDuration:
    """Longest dip duration at magnitude delta_V before the criterion triggers.

    Args:
        delta_V: Dip magnitude [pu]
        criterion: LVRT entry or post-fault power fraction
        params: Converter parameters
        dt: Integration step [s]
        horizon: Simulated span, at least the upper bracket end [s]
        bracket: (lower, upper) duration bracket [s]
        x0: Initial state, defaults to the pre-fault equilibrium
        tol: Final bracket width [s]

    Returns:
        CriticalDuration with status and duration

    Raises:
        ValueError: If the bracket is invalid
        NonMonotoneCriterionError: If the criterion is critical at the lower
            end but not at the upper end
    """
    lo, hi = bracket
    if not 0 <= lo < hi <= horizon:
        raise ValueError(f"Invalid bracket {bracket} for horizon {horizon}")
    if x0 is None:
        x0 = find_equilibrium(params, V_t=1.0)
    evaluations = 0

    def critical(delta_T: float) -> bool:
        nonlocal evaluations
        evaluations += 1
        trajectory = integrate(x0, DisturbanceSpec(delta_V, delta_T), params, dt, horizon)
        return criterion.is_critical(trajectory, params)

    crit_lo = critical(lo)
    crit_hi = critical(hi)
    if crit_lo and crit_hi:
        return CriticalDuration("always-critical", lo, evaluations)
    if not crit_lo and not crit_hi:
        return CriticalDuration("never-critical", hi, evaluations)
    if crit_lo:
        raise NonMonotoneCriterionError(
            f"Criterion is not monotone over {bracket} at delta_V={delta_V}: critical at the lower end only",
            operation="dynamics.critical_duration",
        )

    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if critical(mid):
            hi = mid
        else:
            lo = mid
    result = 0.5 * (lo + hi)
    logger.debug(
        f"Critical duration for delta_V={delta_V}: {result:.5f} s after {evaluations} simulations",
        extra={"pipeline_event": "critical_duration", "criterion": criterion.kind},
    )
    return CriticalDuration("optimal", result, evaluations)
