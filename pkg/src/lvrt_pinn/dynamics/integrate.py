"""Fixed-step RK4 integration of the converter model under voltage dips."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from lvrt_pinn.dynamics.model import (
    ALGEBRAIC_NAMES,
    OUTPUT_NAMES,
    AlgebraicVars,
    ConverterState,
    check_validity,
    evaluate_algebraic,
    evaluate_derivatives,
    lvrt_factor,
)
from lvrt_pinn.dynamics.params import ConverterParams, DisturbanceSpec
from lvrt_pinn.errors import DatasetFormatError, IntegrationDivergedError

logger = logging.getLogger(__name__)

SWITCH_TOLERANCE = 1e-12

STATE_COLUMNS = ("theta_pll", "i_d", "i_q", "V_meas", "f_latched")
TRAJECTORY_ALGEBRAIC = (
    "v_d",
    "v_q",
    "omega_pll",
    "v_gd",
    "v_gq",
    "P_VSC",
    "Q_VSC",
    "V_PCC",
    "P_total",
    "Q_total",
)
TRAJECTORY_COLUMNS = ("t",) + STATE_COLUMNS + TRAJECTORY_ALGEBRAIC + ("V_t",)


@dataclass(frozen=True)
class Trajectory:
    """Sampled response of the converter to one disturbance.

    Arrays are read-only after construction.

    Attributes:
        times: sample instants, starting at 0 with constant step [s]
        states: (n, 5) array of STATE_COLUMNS
        algebraic: (n, 10) array of TRAJECTORY_ALGEBRAIC
        v_t: external voltage at each sample [pu]
        disturbance: the applied dip
        min_v_meas: V_meas nadir over every accepted step and sub-step [pu]
    """

    times: np.ndarray
    states: np.ndarray
    algebraic: np.ndarray
    v_t: np.ndarray
    disturbance: DisturbanceSpec
    min_v_meas: float

    def __post_init__(self):
        n = len(self.times)
        if self.states.shape != (n, len(STATE_COLUMNS)):
            raise ValueError(
                f"states must have shape ({n}, {len(STATE_COLUMNS)}), got {self.states.shape}"
            )
        if self.algebraic.shape != (n, len(TRAJECTORY_ALGEBRAIC)):
            raise ValueError(
                f"algebraic must have shape ({n}, {len(TRAJECTORY_ALGEBRAIC)}), got {self.algebraic.shape}"
            )
        if self.v_t.shape != (n,):
            raise ValueError(f"v_t must have shape ({n},), got {self.v_t.shape}")
        for arr in (self.times, self.states, self.algebraic, self.v_t):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def column(self, name: str) -> np.ndarray:
        """Return one named column (state, algebraic, ``t`` or ``V_t``)."""
        if name == "t":
            return self.times
        if name == "V_t":
            return self.v_t
        if name in STATE_COLUMNS:
            return self.states[:, STATE_COLUMNS.index(name)]
        if name in TRAJECTORY_ALGEBRAIC:
            return self.algebraic[:, TRAJECTORY_ALGEBRAIC.index(name)]
        raise KeyError(f"Unknown trajectory column: {name}")

    def final(self, name: str) -> float:
        return float(self.column(name)[-1])

    def state_at(self, k: int) -> ConverterState:
        row = self.states[k]
        return ConverterState(*(float(v) for v in row))

    def algebraic_at(self, k: int, params: ConverterParams) -> AlgebraicVars:
        """Full algebraic variable set at sample k, recomputed from the state."""
        state = self.state_at(k)
        values = evaluate_algebraic(
            np,
            np.float64(state.theta_pll),
            np.float64(state.i_d),
            np.float64(state.i_q),
            np.float64(state.V_meas),
            np.float64(state.f_latched),
            np.float64(self.v_t[k]),
            params,
        )
        return AlgebraicVars.from_mapping(values)

    def outputs(self) -> np.ndarray:
        """(n, 14) array of the network outputs in OUTPUT_NAMES order."""
        return np.column_stack([self.column(name) for name in OUTPUT_NAMES])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: self.column(name) for name in TRAJECTORY_COLUMNS})


def _step_count(dt: float, horizon: float) -> int:
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon={horizon} is not an integer multiple of dt={dt}")
    return n


def _rk4(x: list[np.ndarray], f_latched, v_t, h, params: ConverterParams, operation: str):
    def deriv(y):
        check_validity(y[3], operation)
        d, _ = evaluate_derivatives(np, y[0], y[1], y[2], y[3], f_latched, v_t, params)
        return d

    k1 = deriv(x)
    k2 = deriv([xi + 0.5 * h * ki for xi, ki in zip(x, k1, strict=True)])
    k3 = deriv([xi + 0.5 * h * ki for xi, ki in zip(x, k2, strict=True)])
    k4 = deriv([xi + h * ki for xi, ki in zip(x, k3, strict=True)])
    return [
        xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4, strict=True)
    ]


def _check_finite(x: list[np.ndarray], disturbances: Sequence[DisturbanceSpec], time: float):
    finite = np.all(np.isfinite(np.stack(x)), axis=0)
    if not np.all(finite):
        bad = disturbances[int(np.argmin(finite))]
        raise IntegrationDivergedError(
            f"Non-finite state at t={time:.6g} s for delta_V={bad.delta_V}, delta_T={bad.delta_T}",
            operation="dynamics.integrate",
        )


def simulate_batch(
    x0: ConverterState,
    disturbances: Sequence[DisturbanceSpec],
    params: ConverterParams,
    dt: float,
    horizon: float,
    show_progress: bool = False,
) -> list[Trajectory]:
    """Integrate many disturbances from the same initial state in one RK4 loop.

    Each element follows exactly the arithmetic of a single ``integrate`` call,
    so results do not depend on batch composition. A step that straddles a
    clearing instant not aligned with the grid is split there; f_latched
    ratchets after every accepted step or sub-step.

    Args:
        x0: Initial state shared by all disturbances
        disturbances: Dips to simulate, returned in the same order
        params: Converter parameters
        dt: Step size [s]
        horizon: Simulated time span, an integer multiple of dt [s]
        show_progress: Show a tqdm bar over time steps

    Returns:
        One Trajectory per disturbance

    Raises:
        ValueError: On invalid dt/horizon or a disturbance longer than the horizon
        IntegrationDivergedError: If any state becomes non-finite
        ModelValidityError: If V_meas falls below the division floor
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not disturbances:
        return []
    for d in disturbances:
        if d.delta_T > horizon + SWITCH_TOLERANCE:
            raise ValueError(f"horizon={horizon} is shorter than delta_T={d.delta_T}")
    n_steps = _step_count(dt, horizon)
    operation = "dynamics.integrate"

    delta_t = np.array([d.delta_T for d in disturbances])
    v_set = np.array([d.V_set for d in disturbances])
    v_dip = v_set - np.array([d.delta_V for d in disturbances])

    # Steps k < switch_step are fully disturbed; unaligned clearings split step switch_step
    ratio = delta_t / dt
    nearest = np.round(ratio)
    aligned = np.abs(delta_t - nearest * dt) <= SWITCH_TOLERANCE
    switch_step = np.where(aligned, nearest, np.floor(ratio)).astype(int)
    first_part = delta_t - switch_step * dt

    batch = len(disturbances)
    x = [np.full(batch, v, dtype=float) for v in x0.continuous()]
    f_latched = np.minimum(np.full(batch, x0.f_latched), lvrt_factor(np, x[3], params))
    min_v = x[3].copy()

    history = np.empty((n_steps + 1, batch, len(STATE_COLUMNS)))
    history[0] = np.stack(x + [f_latched], axis=1)

    steps = range(n_steps)
    if show_progress:
        steps = tqdm(steps, desc="Simulating", unit="step")
    for k in steps:
        v_step = np.where(k < switch_step, v_dip, v_set)
        split = (~aligned) & (k == switch_step)
        h1 = np.where(split, first_part, dt)
        v1 = np.where(split, v_dip, v_step)
        x = _rk4(x, f_latched, v1, h1, params, operation)
        f_latched = np.minimum(f_latched, lvrt_factor(np, x[3], params))
        min_v = np.minimum(min_v, x[3])
        if np.any(split):
            h2 = np.where(split, dt - first_part, 0.0)
            x = _rk4(x, f_latched, v_set, h2, params, operation)
            f_latched = np.minimum(f_latched, lvrt_factor(np, x[3], params))
            min_v = np.minimum(min_v, x[3])
        _check_finite(x, disturbances, (k + 1) * dt)
        history[k + 1] = np.stack(x + [f_latched], axis=1)

    times = np.arange(n_steps + 1) * dt
    v_grid = np.where(times[:, None] < delta_t[None, :], v_dip[None, :], v_set[None, :])
    alg = evaluate_algebraic(
        np,
        history[..., 0],
        history[..., 1],
        history[..., 2],
        history[..., 3],
        history[..., 4],
        v_grid,
        params,
    )
    algebraic = np.stack([alg[name] for name in TRAJECTORY_ALGEBRAIC], axis=-1)

    logger.debug(
        f"Simulated {batch} disturbance(s) over {n_steps} steps",
        extra={"pipeline_event": "simulate", "batch": batch, "steps": n_steps},
    )
    return [
        Trajectory(
            times=times.copy(),
            states=np.ascontiguousarray(history[:, b, :]),
            algebraic=np.ascontiguousarray(algebraic[:, b, :]),
            v_t=np.ascontiguousarray(v_grid[:, b]),
            disturbance=disturbances[b],
            min_v_meas=float(min_v[b]),
        )
        for b in range(batch)
    ]


def integrate(
    x0: ConverterState,
    disturbance: DisturbanceSpec,
    params: ConverterParams,
    dt: float = 1e-3,
    horizon: float = 1.0,
) -> Trajectory:
    """Simulate one disturbance with fixed-step classical RK4.

    Args:
        x0: Initial state; f_latched starts at min(x0.f_latched, f_inst(x0.V_meas))
        disturbance: Rectangular voltage dip
        params: Converter parameters
        dt: Step size [s]
        horizon: Simulated span, at least disturbance.delta_T [s]

    Returns:
        Trajectory sampled every dt from 0 to horizon
    """
    return simulate_batch(x0, [disturbance], params, dt, horizon)[0]


def write_trajectory_csv(trajectory: Trajectory, path: Path | str) -> None:
    """Write a trajectory with the fixed column order and 17 significant digits."""
    trajectory.to_frame().to_csv(path, index=False, float_format="%.17g")


def read_trajectory_csv(path: Path | str, disturbance: DisturbanceSpec | None = None) -> Trajectory:
    """Read a trajectory CSV written by ``write_trajectory_csv``.

    When ``disturbance`` is omitted it is recovered from the V_t column
    (pre-fault level from the last sample, clearing at the first sample back
    at that level). The nadir is taken from the sampled V_meas column.

    Raises:
        DatasetFormatError: On a wrong header or a malformed row
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    if tuple(frame.columns) != TRAJECTORY_COLUMNS:
        raise DatasetFormatError(
            f"Unexpected trajectory header: {','.join(frame.columns)}",
            line=1,
            operation="dynamics.read_trajectory_csv",
        )
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        raise DatasetFormatError(
            "Malformed trajectory row",
            line=int(np.argmax(bad)) + 2,
            operation="dynamics.read_trajectory_csv",
        )
    data = numeric.to_numpy(dtype=float)
    times = data[:, 0]
    v_t = data[:, -1]
    if disturbance is None:
        v_set = float(v_t[-1])
        dipped = v_t < v_set
        delta_v = float(v_set - v_t[0]) if dipped[0] else 0.0
        delta_t = float(times[int(np.argmin(dipped))]) if dipped[0] else 0.0
        disturbance = DisturbanceSpec(delta_V=delta_v, delta_T=delta_t, V_set=v_set)
    states = data[:, 1 : 1 + len(STATE_COLUMNS)]
    algebraic = data[:, 1 + len(STATE_COLUMNS) : -1]
    return Trajectory(
        times=times,
        states=np.ascontiguousarray(states),
        algebraic=np.ascontiguousarray(algebraic),
        v_t=np.ascontiguousarray(v_t),
        disturbance=disturbance,
        min_v_meas=float(states[:, 3].min()),
    )
