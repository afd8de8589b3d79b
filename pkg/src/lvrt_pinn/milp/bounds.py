"""Pre-activation bounds of hidden neurons and their cache files."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from lvrt_pinn.dataset import InputBox
from lvrt_pinn.errors import DatasetFormatError
from lvrt_pinn.pinn.model import MlpModel, pre_activations

logger = logging.getLogger(__name__)

BoundsSource = Literal["interval", "lp-tightened"]
BOUNDS_COLUMNS = ("layer", "neuron", "z_min", "z_max")

Box = InputBox | tuple[np.ndarray, np.ndarray]


def box_arrays(model: MlpModel, box: Box | None) -> tuple[np.ndarray, np.ndarray]:
    """Raw (lower, upper) input arrays; None means the model's training box."""
    if box is None:
        lower, upper = model.input_bounds()
    elif isinstance(box, InputBox):
        lower, upper = box.lower, box.upper
    else:
        lower, upper = (np.asarray(v, dtype=float) for v in box)
    if lower.shape != (model.n_inputs,) or upper.shape != (model.n_inputs,):
        raise ValueError(f"Input box must have {model.n_inputs} components")
    if np.any(lower > upper) or not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("Input box must be finite with lower <= upper")
    return lower.copy(), upper.copy()


@dataclass
class NeuronBounds:
    """Per-layer pre-activation bounds ẑ_min, ẑ_max in scaled units.

    ``lower[k]`` and ``upper[k]`` belong to hidden layer k + 1.
    """

    lower: list[np.ndarray]
    upper: list[np.ndarray]
    input_lower: np.ndarray
    input_upper: np.ndarray
    source: BoundsSource = "interval"
    model_hash: str = ""

    def __post_init__(self):
        self.lower = [np.asarray(v, dtype=float) for v in self.lower]
        self.upper = [np.asarray(v, dtype=float) for v in self.upper]
        self.input_lower = np.asarray(self.input_lower, dtype=float)
        self.input_upper = np.asarray(self.input_upper, dtype=float)
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must cover the same layers")
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper, strict=True)):
            if lo.shape != hi.shape:
                raise ValueError(f"Layer {k + 1}: bound shapes differ")
            if np.any(lo > hi):
                raise ValueError(f"Layer {k + 1}: z_min exceeds z_max")

    @property
    def n_layers(self) -> int:
        return len(self.lower)

    def total_width(self) -> float:
        return float(sum(np.sum(hi - lo) for lo, hi in zip(self.lower, self.upper, strict=True)))

    def stable_counts(self) -> tuple[int, int, int]:
        """Numbers of (always active, always inactive, unstable) neurons."""
        active = sum(int(np.sum(lo >= 0)) for lo in self.lower)
        inactive = sum(int(np.sum(hi <= 0)) for hi in self.upper)
        total = sum(len(lo) for lo in self.lower)
        return active, inactive, total - active - inactive

    def contains(self, values: list[np.ndarray], tol: float = 0.0) -> bool:
        """Whether every sampled pre-activation lies inside the bounds."""
        return all(
            bool(np.all(v >= lo - tol) and np.all(v <= hi + tol))
            for v, lo, hi in zip(values, self.lower, self.upper, strict=True)
        )


def interval_bounds(model: MlpModel, box: Box | None = None) -> NeuronBounds:
    """Propagate the input box through the hidden layers with interval arithmetic.

    With W⁺ and W⁻ the positive and negative parts of W_k,
    ẑ_min = W⁺ z_min + W⁻ z_max + b and ẑ_max = W⁺ z_max + W⁻ z_min + b, where
    z is the ReLU image of the previous interval.
    """
    raw_lo, raw_hi = box_arrays(model, box)
    a = model.input_scaling.apply(raw_lo)
    b = model.input_scaling.apply(raw_hi)
    z_lo, z_hi = np.minimum(a, b), np.maximum(a, b)

    lower, upper = [], []
    for w, bias in zip(model.weights[:-1], model.biases[:-1], strict=True):
        w_pos, w_neg = np.maximum(w, 0.0), np.minimum(w, 0.0)
        zhat_lo = w_pos @ z_lo + w_neg @ z_hi + bias
        zhat_hi = w_pos @ z_hi + w_neg @ z_lo + bias
        lower.append(zhat_lo)
        upper.append(zhat_hi)
        z_lo, z_hi = np.maximum(zhat_lo, 0.0), np.maximum(zhat_hi, 0.0)
    return NeuronBounds(lower, upper, raw_lo, raw_hi, source="interval")


def check_bounds_cover(
    model: MlpModel, bounds: NeuronBounds, n_samples: int = 256, seed: int = 0, tol: float = 1e-9
) -> None:
    """Sample the input box and verify every pre-activation stays inside the bounds.

    Raises:
        ValueError: If a sampled activation falls outside
    """
    rng = np.random.default_rng(seed)
    points = bounds.input_lower + rng.random((n_samples, model.n_inputs)) * (
        bounds.input_upper - bounds.input_lower
    )
    if not bounds.contains(pre_activations(model, points), tol=tol):
        raise ValueError("Sampled pre-activations fall outside the neuron bounds")


def write_bounds(bounds: NeuronBounds, path: Path | str) -> None:
    """Write the bounds cache CSV and its JSON sidecar (same stem, .json)."""
    path = Path(path)
    rows = [
        (k + 1, j, float(lo[j]), float(hi[j]))
        for k, (lo, hi) in enumerate(zip(bounds.lower, bounds.upper, strict=True))
        for j in range(len(lo))
    ]
    frame = pd.DataFrame(rows, columns=list(BOUNDS_COLUMNS))
    frame.to_csv(path, index=False, float_format="%.17g")
    sidecar = {
        "source": bounds.source,
        "model_hash": bounds.model_hash,
        "widths": [len(lo) for lo in bounds.lower],
        "input_lower": bounds.input_lower.tolist(),
        "input_upper": bounds.input_upper.tolist(),
    }
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(sidecar, f, indent=2)


def read_bounds(path: Path | str) -> NeuronBounds:
    """Read a bounds cache written by ``write_bounds``.

    Raises:
        DatasetFormatError: On a malformed CSV or a row/sidecar mismatch
    """
    path = Path(path)
    operation = "milp.read_bounds"
    with open(path.with_suffix(".json")) as f:
        sidecar = json.load(f)
    frame = pd.read_csv(path, float_precision="round_trip")
    if tuple(frame.columns) != BOUNDS_COLUMNS:
        raise DatasetFormatError(
            f"Unexpected bounds header {list(frame.columns)}", operation=operation, line=1
        )
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        raise DatasetFormatError(
            "Malformed bounds row", operation=operation, line=int(np.argmax(bad)) + 2
        )

    widths = [int(w) for w in sidecar["widths"]]
    lower = [np.full(w, np.nan) for w in widths]
    upper = [np.full(w, np.nan) for w in widths]
    for row_no, (layer, neuron, lo, hi) in enumerate(numeric.itertuples(index=False), start=2):
        k, j = int(layer) - 1, int(neuron)
        if not (0 <= k < len(widths) and 0 <= j < widths[k]):
            raise DatasetFormatError(
                f"Neuron ({int(layer)}, {j}) outside the layer widths",
                operation=operation,
                line=row_no,
            )
        lower[k][j], upper[k][j] = lo, hi
    if any(np.isnan(v).any() for v in lower + upper):
        raise DatasetFormatError("Bounds file does not cover every neuron", operation=operation)
    return NeuronBounds(
        lower,
        upper,
        np.asarray(sidecar["input_lower"], dtype=float),
        np.asarray(sidecar["input_upper"], dtype=float),
        source=sidecar.get("source", "interval"),
        model_hash=sidecar.get("model_hash", ""),
    )
