"""Training data: simulated trajectories and physics collocation points."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import qmc

from lvrt_pinn.dynamics import (
    OUTPUT_NAMES,
    ConverterParams,
    DisturbanceSpec,
    find_equilibrium,
    simulate_batch,
)
from lvrt_pinn.errors import DatasetFormatError, ManifestMismatchError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INPUT_NAMES = ("t", "delta_V", "delta_T")
LABEL_COLUMNS = INPUT_NAMES + OUTPUT_NAMES
COLLOCATION_COLUMNS = INPUT_NAMES + ("V_t",)

LABELS_FILE = "labels.csv"
COLLOCATION_FILE = "collocation.csv"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class InputBox:
    """Axis-aligned domain of the network inputs (t, delta_V, delta_T)."""

    t: tuple[float, float]
    delta_V: tuple[float, float]
    delta_T: tuple[float, float]

    def __post_init__(self):
        for name, (lo, hi) in zip(INPUT_NAMES, self.bounds(), strict=True):
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"Invalid {name} range [{lo}, {hi}]")

    def bounds(self) -> list[tuple[float, float]]:
        return [tuple(self.t), tuple(self.delta_V), tuple(self.delta_T)]

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds()], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds()], dtype=float)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lower - tol) & (points <= self.upper + tol), axis=1)

    def to_dict(self) -> dict:
        return {name: list(b) for name, b in zip(INPUT_NAMES, self.bounds(), strict=True)}

    @classmethod
    def from_dict(cls, data: dict) -> "InputBox":
        return cls(**{name: tuple(data[name]) for name in INPUT_NAMES})


@dataclass(frozen=True)
class GridSpec:
    """Disturbance grid of the simulated training trajectories.

    Attributes:
        delta_T_values: dip durations, strictly increasing [s]
        delta_V_values: dip magnitudes, strictly increasing [pu]
        dt: integration step [s]
        horizon: simulated span [s]
        stride: keep every stride-th sample as a labeled point
    """

    delta_T_values: tuple[float, ...] = (0.1, 0.15, 0.2, 0.25)
    delta_V_values: tuple[float, ...] = (
        0.2, 0.267, 0.333, 0.4, 0.467, 0.533, 0.6, 0.667, 0.733, 0.8,
    )  # fmt: skip
    dt: float = 1e-3
    horizon: float = 1.0
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "delta_T_values", tuple(float(v) for v in self.delta_T_values))
        object.__setattr__(self, "delta_V_values", tuple(float(v) for v in self.delta_V_values))
        for name in ("delta_T_values", "delta_V_values"):
            values = np.asarray(getattr(self, name))
            if values.size == 0:
                raise ValueError(f"{name} must not be empty")
            if np.any(np.diff(values) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.horizon < max(self.delta_T_values):
            raise ValueError(f"horizon={self.horizon} is shorter than the longest dip")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")

    @property
    def n_samples(self) -> int:
        """Simulated samples per trajectory, including t = 0."""
        return int(round(self.horizon / self.dt)) + 1

    @property
    def samples_per_trajectory(self) -> int:
        """Labeled samples kept per trajectory under the stride."""
        return (self.n_samples - 1) // self.stride + 1

    @property
    def n_trajectories(self) -> int:
        return len(self.delta_T_values) * len(self.delta_V_values)

    def disturbances(self) -> list[DisturbanceSpec]:
        """Grid disturbances, delta_T outer and delta_V inner."""
        return [
            DisturbanceSpec(delta_V=dv, delta_T=dT)
            for dT in self.delta_T_values
            for dv in self.delta_V_values
        ]

    def box(self) -> InputBox:
        return InputBox(
            t=(0.0, self.horizon),
            delta_V=(self.delta_V_values[0], self.delta_V_values[-1]),
            delta_T=(self.delta_T_values[0], self.delta_T_values[-1]),
        )

    def to_dict(self) -> dict:
        return {
            "delta_T_values": list(self.delta_T_values),
            "delta_V_values": list(self.delta_V_values),
            "dt": self.dt,
            "horizon": self.horizon,
            "stride": self.stride,
        }


@dataclass
class TrainingSet:
    """Labeled trajectory samples plus collocation points.

    Attributes:
        inputs: (N, 3) labeled inputs (t, delta_V, delta_T)
        outputs: (N, 14) labels in OUTPUT_NAMES order
        collocation: (N_c, 3) collocation inputs
        collocation_v_t: (N_c,) external voltage at each collocation point
        grid: grid the labels were simulated on
        params: converter parameters of the simulation
        seed: collocation sampling seed
    """

    inputs: np.ndarray
    outputs: np.ndarray
    collocation: np.ndarray
    collocation_v_t: np.ndarray
    grid: GridSpec
    params: ConverterParams = field(default_factory=ConverterParams)
    seed: int = 0

    @property
    def N(self) -> int:
        return len(self.inputs)

    @property
    def N_c(self) -> int:
        return len(self.collocation)

    def box(self) -> InputBox:
        return self.grid.box()

    def manifest(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "grid": self.grid.to_dict(),
            "seed": self.seed,
            "N": self.N,
            "N_c": self.N_c,
            "box": self.box().to_dict(),
            "params": self.params.to_dict(),
        }


def external_voltage(points: np.ndarray, V_set: float = 1.0) -> np.ndarray:
    """V_t(t; delta_V, delta_T) for rows of (t, delta_V, delta_T)."""
    points = np.atleast_2d(points)
    t, delta_v, delta_t = points[:, 0], points[:, 1], points[:, 2]
    return np.where(t < delta_t, V_set - delta_v, V_set)


def sample_collocation(
    box: InputBox, n_points: int, seed: int, V_set: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Latin-hypercube collocation points over the input box.

    Returns:
        (points, v_t): (n_points, 3) inputs and the external voltage at each
    """
    if n_points <= 0:
        raise ValueError(f"n_points must be > 0, got {n_points}")
    sampler = qmc.LatinHypercube(d=len(INPUT_NAMES), seed=seed)
    unit = sampler.random(n=n_points)
    # Affine map by hand: qmc.scale rejects degenerate axes of a 1-point grid
    points = box.lower + unit * (box.upper - box.lower)
    return points, external_voltage(points, V_set)


def generate_training_set(
    grid: GridSpec,
    params: ConverterParams,
    n_collocation: int = 10_000,
    seed: int = 0,
    show_progress: bool = False,
) -> TrainingSet:
    """Simulate every grid disturbance and sample collocation points.

    Trajectories start from the pre-fault equilibrium and are assembled in
    grid order (delta_T outer, delta_V inner).

    Raises:
        EquilibriumNotFoundError: If the set-point has no equilibrium
        IntegrationDivergedError: Naming the offending (delta_V, delta_T)
    """
    x0 = find_equilibrium(params, V_t=1.0)
    disturbances = grid.disturbances()
    logger.info(
        f"Simulating {len(disturbances)} trajectories (dt={grid.dt}, horizon={grid.horizon})",
        extra={"pipeline_event": "gen_data", "trajectories": len(disturbances)},
    )
    trajectories = simulate_batch(x0, disturbances, params, grid.dt, grid.horizon, show_progress)

    inputs, outputs = [], []
    for trajectory in trajectories:
        idx = slice(None, None, grid.stride)
        times = trajectory.times[idx]
        d = trajectory.disturbance
        inputs.append(
            np.column_stack([times, np.full_like(times, d.delta_V), np.full_like(times, d.delta_T)])
        )
        outputs.append(trajectory.outputs()[idx])

    collocation, v_t = sample_collocation(grid.box(), n_collocation, seed)
    training_set = TrainingSet(
        inputs=np.vstack(inputs),
        outputs=np.vstack(outputs),
        collocation=collocation,
        collocation_v_t=v_t,
        grid=grid,
        params=params,
        seed=seed,
    )
    logger.info(f"Training set ready: N={training_set.N}, N_c={training_set.N_c}")
    return training_set


def write_set(training_set: TrainingSet, directory: Path | str) -> None:
    """Write labels.csv, collocation.csv and manifest.json into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    labels = pd.DataFrame(
        np.hstack([training_set.inputs, training_set.outputs]), columns=list(LABEL_COLUMNS)
    )
    labels.to_csv(directory / LABELS_FILE, index=False, float_format="%.17g")
    colloc = pd.DataFrame(
        np.column_stack([training_set.collocation, training_set.collocation_v_t]),
        columns=list(COLLOCATION_COLUMNS),
    )
    colloc.to_csv(directory / COLLOCATION_FILE, index=False, float_format="%.17g")
    with open(directory / MANIFEST_FILE, "w") as f:
        json.dump(training_set.manifest(), f, indent=2)


def _read_table(path: Path, columns: tuple[str, ...]) -> np.ndarray:
    operation = "dataset.read_set"
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.ParserError as e:
        raise DatasetFormatError(f"{path.name}: {e}", operation=operation) from e
    except pd.errors.EmptyDataError as e:
        raise DatasetFormatError(f"{path.name} is empty", operation=operation, line=1) from e
    if tuple(frame.columns) != columns:
        raise DatasetFormatError(
            f"{path.name}: unexpected header {','.join(map(str, frame.columns))}",
            operation=operation,
            line=1,
        )
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        raise DatasetFormatError(
            f"{path.name}: missing or non-numeric field",
            operation=operation,
            line=int(np.argmax(bad)) + 2,
        )
    return numeric.to_numpy(dtype=float)


def read_set(directory: Path | str) -> TrainingSet:
    """Read a training set written by ``write_set`` and check it against its manifest.

    Raises:
        FileNotFoundError: If a file is missing
        DatasetFormatError: On a malformed file, with the offending line
        ManifestMismatchError: If counts or grid disagree with the data
    """
    directory = Path(directory)
    operation = "dataset.read_set"
    with open(directory / MANIFEST_FILE) as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(
                f"{MANIFEST_FILE}: {e.msg}", operation=operation, line=e.lineno
            ) from e
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ManifestMismatchError(
            f"Unsupported manifest schema_version {manifest.get('schema_version')}",
            operation=operation,
        )
    try:
        grid = GridSpec(**manifest["grid"])
        params = ConverterParams(**manifest["params"])
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestMismatchError(f"Invalid manifest: {e}", operation=operation) from e

    labels = _read_table(directory / LABELS_FILE, LABEL_COLUMNS)
    colloc = _read_table(directory / COLLOCATION_FILE, COLLOCATION_COLUMNS)

    expected_n = grid.n_trajectories * grid.samples_per_trajectory
    if len(labels) != manifest.get("N") or len(labels) != expected_n:
        raise ManifestMismatchError(
            f"labels hold {len(labels)} rows, manifest N={manifest.get('N')}, grid implies {expected_n}",
            operation=operation,
        )
    if len(colloc) != manifest.get("N_c"):
        raise ManifestMismatchError(
            f"collocation holds {len(colloc)} rows, manifest N_c={manifest.get('N_c')}",
            operation=operation,
        )
    pairs = {(d.delta_V, d.delta_T) for d in grid.disturbances()}
    seen = set(map(tuple, labels[:, 1:3]))
    if seen != pairs:
        raise ManifestMismatchError(
            "Labeled (delta_V, delta_T) pairs do not match the manifest grid", operation=operation
        )

    return TrainingSet(
        inputs=labels[:, : len(INPUT_NAMES)],
        outputs=labels[:, len(INPUT_NAMES) :],
        collocation=colloc[:, : len(INPUT_NAMES)],
        collocation_v_t=colloc[:, -1],
        grid=grid,
        params=params,
        seed=int(manifest.get("seed", 0)),
    )
