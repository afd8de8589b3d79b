"""LP-relaxation bound tightening."""

import logging

import numpy as np
from tqdm import tqdm

from lvrt_pinn.errors import BoundTighteningError
from lvrt_pinn.milp.bounds import Box, NeuronBounds, interval_bounds
from lvrt_pinn.milp.encoding import encode_prefix
from lvrt_pinn.milp.simplex import FEASIBILITY_TOL, solve_arrays
from lvrt_pinn.pinn.model import MlpModel

logger = logging.getLogger(__name__)

FIXPOINT_TOL = 1e-9


def _tighten_layer(model: MlpModel, bounds: NeuronBounds, layer: int, show_progress: bool) -> None:
    problem, zhat_idx = encode_prefix(model, bounds, layer)
    a, senses, b = problem.dense()
    lower, upper = problem.bounds_arrays()
    k = layer - 1
    neurons = range(len(zhat_idx))
    if show_progress:
        neurons = tqdm(neurons, desc=f"Tightening layer {layer}", unit="neuron", leave=False)
    for j in neurons:
        c = np.zeros(problem.n_vars)
        c[zhat_idx[j]] = 1.0
        optima = []
        for maximize in (True, False):
            solution = solve_arrays(c, a, senses, b, lower, upper, maximize=maximize)
            if not solution.is_optimal:
                raise BoundTighteningError(
                    f"{'Max' if maximize else 'Min'} LP returned {solution.status}",
                    operation="milp.tighten_bounds_lp",
                    layer=layer,
                    neuron=j,
                )
            optima.append(solution.objective)
        hi_lp, lo_lp = optima
        # Pad by the solver tolerance so the bound stays valid
        lo_new = lo_lp - FEASIBILITY_TOL * (1.0 + abs(lo_lp))
        hi_new = hi_lp + FEASIBILITY_TOL * (1.0 + abs(hi_lp))
        bounds.lower[k][j] = max(bounds.lower[k][j], lo_new)
        bounds.upper[k][j] = min(bounds.upper[k][j], hi_new)


def tighten_bounds_lp(
    model: MlpModel,
    box: Box | None = None,
    bounds: NeuronBounds | None = None,
    max_passes: int = 1,
    show_progress: bool = False,
) -> NeuronBounds:
    """Replace neuron bounds by optima of LP relaxations, layer by layer.

    Layer 1 is an affine image of the input box, so its interval bounds are
    already exact and are kept. Each later neuron gets two LPs (max and min of
    ẑ) over the relaxed encoding of the preceding layers, which already use
    the tightened bounds. The result never leaves the starting bounds.

    Args:
        model: Trained network
        box: Raw input box, used when ``bounds`` is None
        bounds: Starting bounds, interval bounds of ``box`` by default
        max_passes: Passes over all layers; stops early at a fixpoint
        show_progress: Show tqdm bars per layer

    Returns:
        New NeuronBounds with source ``lp-tightened``

    Raises:
        BoundTighteningError: If an LP does not solve to optimality
    """
    if bounds is None:
        bounds = interval_bounds(model, box)
    result = NeuronBounds(
        [lo.copy() for lo in bounds.lower],
        [hi.copy() for hi in bounds.upper],
        bounds.input_lower,
        bounds.input_upper,
        source="lp-tightened",
        model_hash=bounds.model_hash,
    )
    start_width = width = result.total_width()
    for pass_no in range(max_passes):
        for layer in range(2, model.depth + 1):
            _tighten_layer(model, result, layer, show_progress)
        new_width = result.total_width()
        logger.debug(f"Tightening pass {pass_no + 1}: total width {width:.6g} -> {new_width:.6g}")
        if width - new_width < FIXPOINT_TOL:
            break
        width = new_width
    active, inactive, unstable = result.stable_counts()
    logger.info(
        f"Tightened bounds: width {start_width:.4g} -> {result.total_width():.4g}, "
        f"{unstable} unstable neurons ({active} active, {inactive} inactive)",
        extra={"pipeline_event": "tighten", "unstable": unstable},
    )
    return result
