"""Curve comparison, curve files and plot-ready tables."""

import json
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from lvrt_pinn.analysis.models import BoundaryCurve, CurveComparison, CurvePoint
from lvrt_pinn.errors import CurveComparisonError, DatasetFormatError

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("delta_V", "delta_T", "status", "objective", "solve_ms", "bounds_source", "param")


def compare_curves(
    predicted: BoundaryCurve, reference: BoundaryCurve, tol: float = 1e-9
) -> CurveComparison:
    """Compare two curves over the magnitudes where both are optimal.

    The reference is linearly interpolated onto the predicted magnitudes that
    lie inside its optimal span; identical grids compare point by point.

    Args:
        predicted: Curve under test, usually from the MILP
        reference: Curve to compare against, usually the simulator
        tol: Differences above this count as non-conservative

    Raises:
        CurveComparisonError: If no common optimal magnitude exists
    """
    x_p, y_p = predicted.optimal()
    x_r, y_r = reference.optimal()
    if x_p.size == 0 or x_r.size == 0:
        raise CurveComparisonError(
            "A curve has no optimal points", operation="analysis.compare_curves"
        )
    inside = (x_p >= x_r[0] - 1e-12) & (x_p <= x_r[-1] + 1e-12)
    if not inside.any():
        raise CurveComparisonError(
            f"Optimal spans [{x_p[0]}, {x_p[-1]}] and [{x_r[0]}, {x_r[-1]}] do not overlap",
            operation="analysis.compare_curves",
        )
    x = x_p[inside]
    diff = y_p[inside] - np.interp(x, x_r, y_r)
    abs_diff = np.abs(diff)
    return CurveComparison(
        delta_V=x,
        differences=diff,
        max_abs=float(abs_diff.max()),
        mean_abs=float(abs_diff.mean()),
        non_conservative=[float(v) for v in x[diff > tol]],
    )


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_curve(curve: BoundaryCurve, path: Path | str) -> None:
    """Write the curve CSV and its JSON sidecar (same stem, .json)."""
    path = Path(path)
    curve.to_frame().to_csv(path, index=False, float_format="%.17g")
    errors = {f"{p.delta_V!r}": p.error for p in curve.points if p.error}
    sidecar = {
        "kind": curve.kind,
        "parameter": curve.parameter,
        "metadata": curve.metadata,
        "errors": errors,
    }
    with open(_sidecar(path), "w") as f:
        json.dump(sidecar, f, indent=2)
    logger.debug(f"Wrote {len(curve)} curve points to {path}")


def read_curve(path: Path | str) -> BoundaryCurve:
    """Read a curve written by ``write_curve``.

    Raises:
        DatasetFormatError: On an unexpected header or a malformed row
    """
    path = Path(path)
    operation = "analysis.read_curve"
    frame = pd.read_csv(
        path, float_precision="round_trip", keep_default_na=False, dtype={"status": str}
    )
    if tuple(frame.columns) != CURVE_COLUMNS:
        raise DatasetFormatError(
            f"Unexpected curve header {list(frame.columns)}", operation=operation, line=1
        )
    sidecar_path = _sidecar(path)
    sidecar = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    errors = sidecar.get("errors", {})

    points = []
    for row_no, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            delta_V = float(row.delta_V)
            points.append(
                CurvePoint(
                    delta_V,
                    float(row.delta_T) if row.delta_T != "" else float("nan"),
                    row.status,
                    float(row.objective) if row.objective != "" else float("nan"),
                    float(row.solve_ms),
                    errors.get(f"{delta_V!r}", ""),
                )
            )
        except (TypeError, ValueError) as e:
            raise DatasetFormatError(
                f"Malformed curve row: {e}", operation=operation, line=row_no
            ) from e

    metadata = sidecar.get("metadata", {})
    if len(frame):
        bounds_source = str(frame["bounds_source"].iloc[0])
        parameter = float(frame["param"].iloc[0])
    else:
        bounds_source = metadata.get("bounds_source", "interval")
        parameter = float(sidecar.get("parameter", 0.0))
    try:
        return BoundaryCurve(
            kind=sidecar.get("kind", metadata.get("kind", "lvrt")),
            parameter=parameter,
            points=points,
            bounds_source=bounds_source,
            metadata=metadata,
        )
    except ValueError as e:
        raise DatasetFormatError(str(e), operation=operation) from e


def plot_table(curves: Sequence[tuple[str, BoundaryCurve]]) -> pd.DataFrame:
    """Wide table of labeled curves on the union of their magnitudes.

    One ``delta_T`` and one ``status`` column per label; magnitudes missing
    from a curve are left empty.
    """
    frames = []
    for label, curve in curves:
        frame = pd.DataFrame(
            {f"{label}_delta_T": curve.delta_T, f"{label}_status": curve.statuses},
            index=pd.Index(np.round(curve.delta_V, 12), name="delta_V"),
        )
        frames.append(frame)
    if not frames:
        raise ValueError("No curves to tabulate")
    return pd.concat(frames, axis=1).sort_index().reset_index()
