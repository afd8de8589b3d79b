"""JSON model files with exact float round-trip."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from lvrt_pinn.errors import ModelFormatError
from lvrt_pinn.pinn.model import AffineScaling, MlpModel

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ACTIVATION = "relu"


def model_to_dict(model: MlpModel, metadata: dict[str, Any] | None = None) -> dict[str, Any]:
    """Plain-data form of a model; floats keep their shortest exact repr."""
    data = {
        "schema_version": SCHEMA_VERSION,
        "activation": ACTIVATION,
        "widths": list(model.widths),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "input_scaling": {
            "offset": model.input_scaling.offset.tolist(),
            "scale": model.input_scaling.scale.tolist(),
        },
        "output_scaling": {
            "offset": model.output_scaling.offset.tolist(),
            "scale": model.output_scaling.scale.tolist(),
        },
        "output_names": list(model.output_names),
    }
    if metadata:
        data["metadata"] = metadata
    return data


def model_from_dict(data: dict[str, Any]) -> MlpModel:
    """Rebuild a model, validating schema version and dimensions.

    Raises:
        ModelFormatError: On an unknown schema, activation or inconsistent shapes
    """
    operation = "pinn.load_model"
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(
            f"Unsupported schema_version {version!r} (expected {SCHEMA_VERSION})",
            operation=operation,
        )
    if data.get("activation") != ACTIVATION:
        raise ModelFormatError(
            f"Unsupported activation {data.get('activation')!r}", operation=operation
        )
    try:
        widths = [int(w) for w in data["widths"]]
        weights = [np.asarray(w, dtype=float) for w in data["weights"]]
        biases = [np.asarray(b, dtype=float) for b in data["biases"]]
        if len(weights) != len(widths) - 1:
            raise ValueError(f"{len(weights)} weight matrices for {len(widths)} widths")
        for k, (w, b) in enumerate(zip(weights, biases, strict=True)):
            if w.shape != (widths[k + 1], widths[k]) or b.shape != (widths[k + 1],):
                raise ValueError(
                    f"layer {k} has weight {w.shape} and bias {b.shape}, widths say ({widths[k + 1]}, {widths[k]})"
                )
        return MlpModel(
            weights=weights,
            biases=biases,
            input_scaling=AffineScaling(**data["input_scaling"]),
            output_scaling=AffineScaling(**data["output_scaling"]),
            output_names=tuple(data["output_names"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"Inconsistent model file: {e}", operation=operation) from e


def save_model(model: MlpModel, path: Path | str, metadata: dict[str, Any] | None = None) -> None:
    with open(path, "w") as f:
        json.dump(model_to_dict(model, metadata), f, indent=1)
    logger.debug(f"Saved model {model.widths} to {path}")


def load_model(path: Path | str) -> MlpModel:
    """Load a model file written by ``save_model``.

    Raises:
        FileNotFoundError: If the file does not exist
        ModelFormatError: If the file is not a valid model document
    """
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(
                f"Not a JSON model file: {e}", operation="pinn.load_model"
            ) from e
    return model_from_dict(data)


def model_hash(model: MlpModel) -> str:
    """sha256 of the canonical JSON form (metadata excluded)."""
    canonical = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
