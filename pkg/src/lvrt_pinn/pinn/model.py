"""ReLU multilayer perceptron shared by training and the MILP encoder.

``MlpModel`` is the exchanged artifact: plain numpy weights plus the affine
input and output scalings. ``ReluNetwork`` mirrors it as a torch module for
training; ``to_module`` and ``from_module`` convert between the two.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from lvrt_pinn.dataset import InputBox
from lvrt_pinn.dynamics import OUTPUT_NAMES

logger = logging.getLogger(__name__)

DOMAIN_TOLERANCE = 1e-9


@dataclass
class AffineScaling:
    """Per-component affine map ``scaled = (raw - offset) / scale``."""

    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        if self.offset.shape != self.scale.shape or self.offset.ndim != 1:
            raise ValueError(
                f"offset and scale must be 1-D of equal length, got {self.offset.shape} and {self.scale.shape}"
            )
        if np.any(self.scale == 0) or not np.all(np.isfinite(self.scale)):
            raise ValueError("Scaling factors must be finite and nonzero")

    def __len__(self) -> int:
        return len(self.offset)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.offset) / self.scale

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        return scaled * self.scale + self.offset

    @classmethod
    def identity(cls, n: int) -> "AffineScaling":
        return cls(np.zeros(n), np.ones(n))

    @classmethod
    def from_box(cls, box: InputBox) -> "AffineScaling":
        """Map each input range onto [-1, 1]; degenerate ranges keep unit scale."""
        half = (box.upper - box.lower) / 2
        return cls((box.upper + box.lower) / 2, np.where(half > 0, half, 1.0))

    @classmethod
    def from_data(cls, values: np.ndarray) -> "AffineScaling":
        """Standardize by column mean and standard deviation."""
        std = values.std(axis=0)
        return cls(values.mean(axis=0), np.where(std > 1e-12, std, 1.0))


@dataclass
class MlpModel:
    """Weights, biases and scalings of a ReLU network.

    Attributes:
        weights: W_k of shape (out, in) for k = 1..K+1
        biases: b_k of shape (out,)
        input_scaling: affine map applied to the raw inputs
        output_scaling: affine map whose inverse de-scales the last layer
        output_names: names of the outputs, in order
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_scaling: AffineScaling
    output_scaling: AffineScaling
    output_names: tuple[str, ...] = field(default=OUTPUT_NAMES)

    def __post_init__(self):
        self.weights = [np.atleast_2d(np.asarray(w, dtype=float)) for w in self.weights]
        self.biases = [np.atleast_1d(np.asarray(b, dtype=float)) for b in self.biases]
        self.output_names = tuple(self.output_names)
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must be non-empty lists of equal length")
        for k, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"Layer {k}: weight rows {w.shape[0]} != bias length {b.shape[0]}")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(
                    f"Layer {k}: expects {w.shape[1]} inputs but layer {k - 1} has {self.weights[k - 1].shape[0]} outputs"
                )
        if self.weights[0].shape[1] != len(self.input_scaling):
            raise ValueError("Input scaling does not match the first layer")
        if self.weights[-1].shape[0] != len(self.output_scaling):
            raise ValueError("Output scaling does not match the last layer")
        if len(self.output_names) != len(self.output_scaling):
            raise ValueError("output_names does not match the output dimension")

    @property
    def widths(self) -> tuple[int, ...]:
        """Layer widths from input to output."""
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.widths[1:-1]

    @property
    def depth(self) -> int:
        """Number of hidden layers K."""
        return len(self.weights) - 1

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]

    def output_index(self, name: str) -> int:
        try:
            return self.output_names.index(name)
        except ValueError:
            raise KeyError(f"Model has no output named {name!r}") from None

    def input_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Raw (lower, upper) input box that the input scaling maps onto [-1, 1]."""
        half = np.abs(self.input_scaling.scale)
        return self.input_scaling.offset - half, self.input_scaling.offset + half

    def in_domain(self, inputs: np.ndarray) -> np.ndarray:
        """Whether each raw input lies inside the scaled training box [-1, 1]."""
        scaled = self.input_scaling.apply(np.atleast_2d(inputs))
        return np.all(np.abs(scaled) <= 1 + DOMAIN_TOLERANCE, axis=1)


def _as_batch(model: MlpModel, inputs) -> tuple[np.ndarray, bool]:
    x = np.asarray(inputs, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.n_inputs:
        raise ValueError(f"Expected inputs with {model.n_inputs} columns, got shape {x.shape}")
    outside = int(np.sum(~model.in_domain(x)))
    if outside:
        logger.warning(f"{outside} input(s) outside the training box; extrapolating")
    return x, single


def pre_activations(model: MlpModel, inputs) -> list[np.ndarray]:
    """Pre-activation values ẑ_k of every hidden layer, shape (N, N_k) each."""
    x, _ = _as_batch(model, inputs)
    z = model.input_scaling.apply(x)
    hidden = []
    for w, b in zip(model.weights[:-1], model.biases[:-1], strict=True):
        z_hat = z @ w.T + b
        hidden.append(z_hat)
        z = np.maximum(z_hat, 0.0)
    return hidden


def forward(model: MlpModel, inputs) -> np.ndarray:
    """Evaluate the network on raw inputs.

    Args:
        model: Network to evaluate
        inputs: (3,) or (N, 3) raw inputs (t, delta_V, delta_T)

    Returns:
        De-scaled outputs, (n_outputs,) or (N, n_outputs)
    """
    x, single = _as_batch(model, inputs)
    z = model.input_scaling.apply(x)
    for w, b in zip(model.weights[:-1], model.biases[:-1], strict=True):
        z = np.maximum(z @ w.T + b, 0.0)
    y = model.output_scaling.invert(z @ model.weights[-1].T + model.biases[-1])
    return y[0] if single else y


def forward_dt(model: MlpModel, inputs, n_states: int = 4) -> np.ndarray:
    """Exact time derivative of the first ``n_states`` outputs.

    Forward-mode propagation of the tangent e_t through the piecewise-affine
    network; the ReLU derivative is 1 where ẑ > 0 and 0 otherwise.
    """
    x, single = _as_batch(model, inputs)
    z = model.input_scaling.apply(x)
    tangent = np.zeros_like(z)
    tangent[:, 0] = 1.0 / model.input_scaling.scale[0]
    for w, b in zip(model.weights[:-1], model.biases[:-1], strict=True):
        z_hat = z @ w.T + b
        active = z_hat > 0
        z = np.where(active, z_hat, 0.0)
        tangent = np.where(active, tangent @ w.T, 0.0)
    d = (tangent @ model.weights[-1].T) * model.output_scaling.scale
    d = d[:, :n_states]
    return d[0] if single else d


def predict(model: MlpModel, inputs) -> dict[str, np.ndarray]:
    """Batch forward returning one array per named output."""
    y = np.atleast_2d(forward(model, np.atleast_2d(inputs)))
    return {name: y[:, i] for i, name in enumerate(model.output_names)}


class ReluNetwork(nn.Module):
    """Torch mirror of an MlpModel operating on raw inputs and outputs (float64)."""

    def __init__(
        self,
        widths: Sequence[int],
        input_scaling: AffineScaling,
        output_scaling: AffineScaling,
        output_names: Sequence[str] = OUTPUT_NAMES,
    ):
        super().__init__()
        self.output_names = tuple(output_names)
        self.layers = nn.ModuleList(
            nn.Linear(n_in, n_out, dtype=torch.float64)
            for n_in, n_out in zip(widths[:-1], widths[1:], strict=True)
        )
        self.register_buffer(
            "in_offset", torch.as_tensor(input_scaling.offset, dtype=torch.float64)
        )
        self.register_buffer("in_scale", torch.as_tensor(input_scaling.scale, dtype=torch.float64))
        self.register_buffer(
            "out_offset", torch.as_tensor(output_scaling.offset, dtype=torch.float64)
        )
        self.register_buffer(
            "out_scale", torch.as_tensor(output_scaling.scale, dtype=torch.float64)
        )

    def forward_scaled(self, x: torch.Tensor) -> torch.Tensor:
        """Scaled outputs (before de-scaling) for raw inputs."""
        z = (x - self.in_offset) / self.in_scale
        for layer in self.layers[:-1]:
            z = torch.relu(layer(z))
        return self.layers[-1](z)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_scaled(x) * self.out_scale + self.out_offset


def to_module(model: MlpModel) -> ReluNetwork:
    """Build a ReluNetwork carrying a copy of the model's parameters."""
    net = ReluNetwork(model.widths, model.input_scaling, model.output_scaling, model.output_names)
    with torch.no_grad():
        for layer, w, b in zip(net.layers, model.weights, model.biases, strict=True):
            layer.weight.copy_(torch.as_tensor(w, dtype=torch.float64))
            layer.bias.copy_(torch.as_tensor(b, dtype=torch.float64))
    return net


def from_module(net: ReluNetwork) -> MlpModel:
    """Extract an MlpModel from a ReluNetwork."""
    return MlpModel(
        weights=[layer.weight.detach().cpu().numpy().copy() for layer in net.layers],
        biases=[layer.bias.detach().cpu().numpy().copy() for layer in net.layers],
        input_scaling=AffineScaling(
            net.in_offset.cpu().numpy().copy(), net.in_scale.cpu().numpy().copy()
        ),
        output_scaling=AffineScaling(
            net.out_offset.cpu().numpy().copy(), net.out_scale.cpu().numpy().copy()
        ),
        output_names=net.output_names,
    )


def init_model(
    hidden_widths: Sequence[int],
    box: InputBox,
    outputs: np.ndarray,
    seed: int,
    output_names: Sequence[str] = OUTPUT_NAMES,
) -> MlpModel:
    """He-uniform initialised model with scalings fitted to the box and labels.

    Args:
        hidden_widths: Neurons per hidden layer
        box: Raw input domain, mapped onto [-1, 1]
        outputs: (N, n_outputs) labels used for the output mean/std scaling
        seed: Seed of the weight initialisation
        output_names: Output names in label column order

    Returns:
        Freshly initialised MlpModel with zero biases
    """
    widths = (3, *hidden_widths, outputs.shape[1])
    generator = torch.Generator().manual_seed(seed)
    weights, biases = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:], strict=True):
        w = torch.empty(n_out, n_in, dtype=torch.float64)
        # kaiming_uniform_ with nonlinearity="relu": bound = sqrt(6 / fan_in)
        bound = float(np.sqrt(6.0 / n_in))
        w.uniform_(-bound, bound, generator=generator)
        weights.append(w.numpy())
        biases.append(np.zeros(n_out))
    return MlpModel(
        weights=weights,
        biases=biases,
        input_scaling=AffineScaling.from_box(box),
        output_scaling=AffineScaling.from_data(outputs),
        output_names=tuple(output_names),
    )
