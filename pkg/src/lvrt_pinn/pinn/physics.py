"""Loss assembly for physics-informed training.

Four groups of per-output mean squared errors, all in scaled units:

- x: differential-state labels
- y: algebraic-output labels
- f: state equations, rhs(x̂, V_t) - dx̂/dt, scaled by h_t / σ_i
- g: algebraic relations recomputed from the predictions, scaled by 1 / σ_i
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import torch

from lvrt_pinn.dataset import TrainingSet
from lvrt_pinn.dynamics import ALGEBRAIC_NAMES, OUTPUT_NAMES, STATE_NAMES, ConverterParams
from lvrt_pinn.dynamics.model import V_MEAS_FLOOR, evaluate_derivatives, lvrt_factor
from lvrt_pinn.pinn.model import MlpModel, ReluNetwork, to_module

logger = logging.getLogger(__name__)

N_STATES = len(STATE_NAMES)


@dataclass(frozen=True)
class LossWeights:
    """Weights λ of the four loss groups."""

    lambda_x: float = 1.0
    lambda_y: float = 1.0
    lambda_f: float = 0.1
    lambda_g: float = 0.1

    def __post_init__(self):
        values = self.as_tuple()
        if any(v < 0 for v in values):
            raise ValueError(f"Loss weights must be non-negative, got {values}")
        if not any(v > 0 for v in values):
            raise ValueError("At least one loss weight must be positive")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lambda_x, self.lambda_y, self.lambda_f, self.lambda_g)

    @property
    def uses_physics(self) -> bool:
        return self.lambda_f > 0 or self.lambda_g > 0


@dataclass(frozen=True)
class LossReport:
    """Per-output loss components and their weighted total.

    Attributes:
        data_x: MSE per differential state (4,)
        data_y: MSE per algebraic output (10,)
        physics_f: MSE of the state-equation residual per state (4,)
        physics_g: MSE of the algebraic residual per algebraic output (10,)
        weights: weights applied to the group sums
    """

    data_x: np.ndarray
    data_y: np.ndarray
    physics_f: np.ndarray
    physics_g: np.ndarray
    weights: LossWeights

    @property
    def L_x(self) -> float:
        return float(np.sum(self.data_x))

    @property
    def L_y(self) -> float:
        return float(np.sum(self.data_y))

    @property
    def L_f(self) -> float:
        return float(np.sum(self.physics_f))

    @property
    def L_g(self) -> float:
        return float(np.sum(self.physics_g))

    @property
    def total(self) -> float:
        w = self.weights
        return (
            w.lambda_x * self.L_x
            + w.lambda_y * self.L_y
            + w.lambda_f * self.L_f
            + w.lambda_g * self.L_g
        )

    def is_finite(self) -> bool:
        return bool(
            all(
                np.all(np.isfinite(a))
                for a in (self.data_x, self.data_y, self.physics_f, self.physics_g)
            )
        )

    def to_dict(self) -> dict[str, float]:
        row = {
            "L_x": self.L_x,
            "L_y": self.L_y,
            "L_f": self.L_f,
            "L_g": self.L_g,
            "total": self.total,
        }
        for name, value in zip(STATE_NAMES, self.data_x, strict=True):
            row[f"x_{name}"] = float(value)
        for name, value in zip(ALGEBRAIC_NAMES, self.data_y, strict=True):
            row[f"y_{name}"] = float(value)
        return row


def algebraic_relations(xp, out: Mapping, v_t, p: ConverterParams) -> dict:
    """Right-hand sides of the algebraic equations evaluated on predictions.

    Relations that reference other algebraic variables use the predicted
    values of those variables, so each residual isolates one equation.
    """
    theta, i_d, i_q = out["theta_pll"], out["i_d"], out["i_q"]
    v_d, v_q, omega = out["v_d"], out["v_q"], out["omega_pll"]
    v_gd, v_gq = out["v_gd"], out["v_gq"]
    return {
        "v_d": v_t * xp.cos(theta),
        "v_q": -v_t * xp.sin(theta),
        "omega_pll": p.K_pomega * v_q + 1.0,
        "P_VSC": v_d * i_d + v_q * i_q,
        "V_PCC": xp.abs(v_t),
        "Q_VSC": v_q * i_d - v_d * i_q,
        "v_gd": v_d + omega * p.L_c * i_q - p.R_c * i_d,
        "v_gq": v_q - omega * p.L_c * i_d - p.R_c * i_q,
        "P_total": v_gd * i_d + v_gq * i_q,
        "Q_total": v_gq * i_d - v_gd * i_q,
    }


def _named(y: torch.Tensor) -> dict[str, torch.Tensor]:
    return {name: y[:, i] for i, name in enumerate(OUTPUT_NAMES)}


def physics_residuals(
    net: ReluNetwork, points: torch.Tensor, v_t: torch.Tensor, params: ConverterParams
) -> tuple[torch.Tensor, torch.Tensor]:
    """Scaled state-equation and algebraic residuals at collocation points.

    The latched LVRT factor is taken from the network's own V_meas prediction
    at min(t, delta_T), the instant right before clearing.

    Returns:
        (res_f, res_g) of shapes (N_c, 4) and (N_c, 10)
    """
    x = points.detach().clone().requires_grad_(True)
    y = net(x)
    out = _named(y)

    d_dt = []
    for i in range(N_STATES):
        (grad,) = torch.autograd.grad(y[:, i].sum(), x, create_graph=True)
        d_dt.append(grad[:, 0])

    clearing = torch.stack(
        [torch.minimum(points[:, 0], points[:, 2]), points[:, 1], points[:, 2]], dim=1
    )
    v_clear = torch.clamp(net(clearing)[:, STATE_NAMES.index("V_meas")], min=V_MEAS_FLOOR)
    f_latched = lvrt_factor(torch, v_clear, params)

    v_meas = torch.clamp(out["V_meas"], min=V_MEAS_FLOOR)
    derivs, _ = evaluate_derivatives(
        torch, out["theta_pll"], out["i_d"], out["i_q"], v_meas, f_latched, v_t, params
    )

    t_half_range = net.in_scale[0]
    res_f = torch.stack(
        [(derivs[i] - d_dt[i]) * t_half_range / net.out_scale[i] for i in range(N_STATES)], dim=1
    )
    relations = algebraic_relations(torch, out, v_t, params)
    res_g = torch.stack(
        [
            (out[name] - relations[name]) / net.out_scale[N_STATES + j]
            for j, name in enumerate(ALGEBRAIC_NAMES)
        ],
        dim=1,
    )
    return res_f, res_g


def loss_terms(
    net: ReluNetwork,
    inputs: torch.Tensor,
    outputs: torch.Tensor,
    points: torch.Tensor | None,
    v_t: torch.Tensor | None,
    params: ConverterParams,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Per-output MSE vectors (x, y, f, g) as differentiable tensors.

    Physics terms are zero vectors when ``points`` is None.
    """
    residual = (net.forward_scaled(inputs) - (outputs - net.out_offset) / net.out_scale) ** 2
    mse = residual.mean(dim=0)
    data_x, data_y = mse[:N_STATES], mse[N_STATES:]
    if points is None:
        zeros = torch.zeros_like(mse)
        return data_x, data_y, zeros[:N_STATES], zeros[N_STATES:]
    if v_t is None:
        raise ValueError("Collocation points need their external voltage V_t")
    res_f, res_g = physics_residuals(net, points, v_t, params)
    return data_x, data_y, (res_f**2).mean(dim=0), (res_g**2).mean(dim=0)


def weighted_total(terms, weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the loss groups; groups with a zero weight add no gradient."""
    total = torch.zeros((), dtype=torch.float64)
    for lam, term in zip(weights.as_tuple(), terms, strict=True):
        if lam > 0:
            total = total + lam * term.sum()
    return total


def report_from_terms(terms, weights: LossWeights) -> LossReport:
    arrays = [t.detach().cpu().numpy().copy() for t in terms]
    return LossReport(*arrays, weights=weights)


def _check_names(model: MlpModel) -> None:
    if model.output_names != OUTPUT_NAMES:
        raise ValueError(f"Model outputs {model.output_names} do not follow {OUTPUT_NAMES}")


def _tensors(training_set: TrainingSet):
    as_t = lambda a: torch.as_tensor(np.asarray(a), dtype=torch.float64)  # noqa: E731
    points = as_t(training_set.collocation) if training_set.N_c else None
    v_t = as_t(training_set.collocation_v_t) if training_set.N_c else None
    return as_t(training_set.inputs), as_t(training_set.outputs), points, v_t


def loss(
    model: MlpModel,
    training_set: TrainingSet,
    weights: LossWeights,
    params: ConverterParams | None = None,
) -> LossReport:
    """Evaluate every loss component on a full training set.

    Args:
        model: Network with outputs in OUTPUT_NAMES order
        training_set: Labeled and collocation points
        weights: λ weights of the groups
        params: Converter parameters, defaults to those of the training set

    Returns:
        LossReport with per-output components and the weighted total
    """
    _check_names(model)
    params = params or training_set.params
    net = to_module(model)
    terms = loss_terms(net, *_tensors(training_set), params)
    return report_from_terms(terms, weights)


def grad(
    model: MlpModel,
    training_set: TrainingSet,
    weights: LossWeights,
    params: ConverterParams | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradient of the weighted total loss with respect to every W_k and b_k.

    Returns:
        One (dW_k, db_k) pair per layer, shaped like the parameters
    """
    _check_names(model)
    params = params or training_set.params
    net = to_module(model)
    total = weighted_total(loss_terms(net, *_tensors(training_set), params), weights)
    net.zero_grad()
    total.backward()
    return [
        (layer.weight.grad.detach().numpy().copy(), layer.bias.grad.detach().numpy().copy())
        for layer in net.layers
    ]
