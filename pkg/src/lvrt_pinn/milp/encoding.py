"""Big-M mixed-integer encoding of a trained ReLU network.

For an unstable neuron with bounds ẑ_min < 0 < ẑ_max the activation
z = max(ẑ, 0) is represented exactly by a binary b and

    z <= ẑ - ẑ_min (1 - b),   z >= ẑ,   z <= ẑ_max b,   z >= 0.

Neurons with ẑ_min >= 0 reduce to z = ẑ and those with ẑ_max <= 0 to z = 0.
Input scaling is folded into the first layer's rows and output de-scaling
into the output rows, so the problem lives in raw units at both ends.
"""

import logging

import numpy as np

from lvrt_pinn.errors import UnboundedNeuronError
from lvrt_pinn.milp.bounds import Box, NeuronBounds, box_arrays, check_bounds_cover
from lvrt_pinn.milp.problem import MilpProblem
from lvrt_pinn.pinn.model import MlpModel

logger = logging.getLogger(__name__)

INPUT_VARIABLES = {"t": "t", "delta_V": "dV", "delta_T": "dT"}


def _input_names(model: MlpModel) -> list[tuple[str, str]]:
    if model.n_inputs == len(INPUT_VARIABLES):
        return list(INPUT_VARIABLES.items())
    return [(f"x{i}", f"x{i}") for i in range(model.n_inputs)]


def _check_bounds(bounds: NeuronBounds, model: MlpModel, n_layers: int) -> None:
    if bounds.n_layers < n_layers:
        raise ValueError(f"Bounds cover {bounds.n_layers} layers, encoding needs {n_layers}")
    for k in range(n_layers):
        lo, hi = bounds.lower[k], bounds.upper[k]
        if lo.shape != (model.hidden_widths[k],):
            raise ValueError(
                f"Layer {k + 1}: bounds for {lo.shape[0]} neurons, "
                f"layer has {model.hidden_widths[k]}"
            )
        bad = ~(np.isfinite(lo) & np.isfinite(hi))
        if bad.any():
            j = int(np.argmax(bad))
            raise UnboundedNeuronError(
                f"Neuron ({k + 1}, {j}) has non-finite bounds [{lo[j]}, {hi[j]}]",
                operation="milp.encode",
            )


def _affine_row(
    model: MlpModel, k: int, j: int, sources: list[int | None]
) -> tuple[dict[int, float], float]:
    """Terms -W z and right-hand side b of neuron j in weight layer k (0-based).

    For the first layer the sources are the raw inputs and the input scaling
    is folded in: ẑ = W ((x - offset) / scale) + b.
    """
    w, bias = model.weights[k], model.biases[k]
    row: dict[int, float] = {}
    rhs = float(bias[j])
    for i, src in enumerate(sources):
        if src is None:
            continue
        if k == 0:
            offset, scale = model.input_scaling.offset[i], model.input_scaling.scale[i]
            row[src] = row.get(src, 0.0) - w[j, i] / scale
            rhs -= w[j, i] * offset / scale
        else:
            row[src] = row.get(src, 0.0) - w[j, i]
    return row, rhs


def _build(
    model: MlpModel,
    box: Box | None,
    bounds: NeuronBounds,
    n_layers: int,
    relax: bool,
    eliminate_stable: bool,
) -> tuple[MilpProblem, list[int | None]]:
    """Encode the inputs and the first ``n_layers`` hidden layers.

    Returns:
        The problem and, per activation of the last encoded layer, its
        variable index or None when it is constantly zero
    """
    _check_bounds(bounds, model, n_layers)
    if box is None:
        lower, upper = bounds.input_lower, bounds.input_upper
    else:
        lower, upper = box_arrays(model, box)
    problem = MilpProblem()
    sources: list[int | None] = []
    for (role, var), lo, hi in zip(_input_names(model), lower, upper, strict=True):
        sources.append(problem.add_variable(var, lo, hi))
        problem.inputs[role] = var

    for k in range(n_layers):
        lo_k, hi_k = bounds.lower[k], bounds.upper[k]
        current: list[int | None] = []
        for j in range(model.weights[k].shape[0]):
            lo, hi = float(lo_k[j]), float(hi_k[j])
            zhat = problem.add_variable(f"zhat_{k + 1}_{j}", lo, hi)
            row, rhs = _affine_row(model, k, j, sources)
            row[zhat] = 1.0
            problem.add_constraint(row, "=", rhs, name=f"affine_{k + 1}_{j}")

            if eliminate_stable and lo >= 0:
                current.append(zhat)
            elif eliminate_stable and hi <= 0:
                current.append(None)
            else:
                z = problem.add_variable(f"z_{k + 1}_{j}", 0.0, max(hi, 0.0))
                b = problem.add_variable(f"b_{k + 1}_{j}", 0.0, 1.0, binary=not relax)
                problem.add_constraint(
                    {z: 1.0, zhat: -1.0, b: -lo}, "<=", -lo, name=f"relu_ub_{k + 1}_{j}"
                )
                problem.add_constraint({z: 1.0, zhat: -1.0}, ">=", 0.0, name=f"relu_lb_{k + 1}_{j}")
                problem.add_constraint({z: 1.0, b: -hi}, "<=", 0.0, name=f"relu_on_{k + 1}_{j}")
                current.append(z)
        sources = current
    return problem, sources


def encode(
    model: MlpModel,
    box: Box | None,
    bounds: NeuronBounds,
    relax: bool = False,
    eliminate_stable: bool = True,
) -> MilpProblem:
    """Encode the full network, outputs in raw units, with no objective.

    Args:
        model: Trained network with at least one hidden layer
        box: Raw input box, None for the box the bounds were computed on
        bounds: Pre-activation bounds used as big-M constants
        relax: Encode binaries as continuous [0, 1] variables
        eliminate_stable: Drop binaries of sign-stable neurons

    Returns:
        MilpProblem with input and output roles filled in

    Raises:
        UnboundedNeuronError: If any neuron bound is not finite
    """
    if model.depth < 1:
        raise ValueError("Encoding needs at least one hidden layer")
    if logger.isEnabledFor(logging.DEBUG):
        check_bounds_cover(model, bounds)
    problem, sources = _build(model, box, bounds, model.depth, relax, eliminate_stable)

    k = model.depth
    out_offset, out_scale = model.output_scaling.offset, model.output_scaling.scale
    for o, name in enumerate(model.output_names):
        var = f"y_{name}"
        y = problem.add_variable(var, -np.inf, np.inf)
        problem.outputs[name] = var
        # y = scale * (W z + b) + offset
        terms, rhs = _affine_row(model, k, o, sources)
        row = {i: out_scale[o] * c for i, c in terms.items()}
        row[y] = 1.0
        problem.add_constraint(row, "=", out_scale[o] * rhs + out_offset[o], name=f"output_{name}")

    binaries = len(problem.binary_indices)
    logger.debug(
        f"Encoded {model.widths} network: {problem.n_vars} variables, {problem.n_rows} rows, {binaries} binaries",
        extra={"pipeline_event": "encode", "binaries": binaries},
    )
    return problem


def encode_prefix(
    model: MlpModel, bounds: NeuronBounds, layer: int
) -> tuple[MilpProblem, list[int]]:
    """LP relaxation of hidden layers 1..layer-1 plus free ẑ variables of ``layer``.

    Used by bound tightening: the returned indices are the ẑ variables of the
    requested (1-based) layer.
    """
    problem, sources = _build(model, None, bounds, layer - 1, relax=True, eliminate_stable=True)
    k = layer - 1
    zhat_idx = []
    for j in range(model.weights[k].shape[0]):
        zhat = problem.add_variable(f"zhat_{layer}_{j}", -np.inf, np.inf)
        row, rhs = _affine_row(model, k, j, sources)
        row[zhat] = 1.0
        problem.add_constraint(row, "=", rhs, name=f"affine_{layer}_{j}")
        zhat_idx.append(zhat)
    return problem, zhat_idx
