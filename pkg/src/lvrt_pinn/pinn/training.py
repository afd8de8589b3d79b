"""Adam training loop with best-validation checkpointing."""

import copy
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from tqdm import tqdm

from lvrt_pinn.dataset import TrainingSet
from lvrt_pinn.dynamics import OUTPUT_NAMES, ConverterParams
from lvrt_pinn.errors import TrainingDivergedError
from lvrt_pinn.pinn.model import MlpModel, forward, from_module, init_model, to_module
from lvrt_pinn.pinn.physics import (
    LossReport,
    LossWeights,
    loss_terms,
    report_from_terms,
    weighted_total,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    Attributes:
        hidden_widths: neurons per hidden layer
        epochs: passes over the labeled points
        batch_size: labeled points per optimizer step
        collocation_batch_size: collocation points per optimizer step
        learning_rate: initial Adam step size
        lr_decay: multiplicative learning-rate decay per epoch
        seed: seed for initialisation, shuffling and the validation split
        weights: λ weights of the loss groups
        validation_split: fraction of labeled points held out
        show_progress: show a tqdm bar over epochs
    """

    hidden_widths: tuple[int, ...] = (16, 16)
    epochs: int = 2000
    batch_size: int = 512
    collocation_batch_size: int = 512
    learning_rate: float = 1e-3
    lr_decay: float = 0.999
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    validation_split: float = 0.1
    show_progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.epochs <= 0:
            raise ValueError(f"epochs must be > 0, got {self.epochs}")
        if self.batch_size <= 0 or self.collocation_batch_size <= 0:
            raise ValueError("Batch sizes must be > 0")
        if not 0 <= self.validation_split < 1:
            raise ValueError(f"validation_split must lie in [0, 1), got {self.validation_split}")
        if not self.hidden_widths or any(w <= 0 for w in self.hidden_widths):
            raise ValueError(f"hidden_widths must be positive, got {self.hidden_widths}")
        if not 0 < self.lr_decay <= 1:
            raise ValueError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["hidden_widths"] = list(self.hidden_widths)
        return data


@dataclass
class TrainingHistory:
    """Per-epoch training and validation loss reports."""

    train: list[LossReport] = field(default_factory=list)
    validation: list[LossReport] = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self) -> int:
        return len(self.train)

    def totals(self) -> list[float]:
        return [r.total for r in self.train]

    def to_rows(self) -> list[dict]:
        rows = []
        for epoch, (tr, va) in enumerate(zip(self.train, self.validation, strict=True)):
            row = {"epoch": epoch}
            row.update(
                {f"train_{k}": v for k, v in tr.to_dict().items() if not k.startswith(("x_", "y_"))}
            )
            row["validation_total"] = va.total
            rows.append(row)
        return rows


def _split(
    n: int, fraction: float, generator: torch.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    perm = torch.randperm(n, generator=generator)
    n_val = int(round(n * fraction))
    if fraction > 0 and n > 1:
        n_val = min(max(n_val, 1), n - 1)
    else:
        n_val = 0
    return perm[n_val:], perm[:n_val]


def train(
    training_set: TrainingSet,
    config: TrainConfig,
    params: ConverterParams | None = None,
) -> tuple[MlpModel, TrainingHistory]:
    """Fit a ReLU network to labels and physics residuals.

    Each optimizer step combines a mini-batch of labeled points with a batch
    of collocation points. The returned model holds the parameters of the
    epoch with the lowest validation total loss.

    Args:
        training_set: Non-empty labeled set; collocation points feed the
            physics terms
        config: Hyperparameters
        params: Converter parameters, defaults to those of the training set

    Returns:
        (best model, loss history)

    Raises:
        ValueError: If the set has no labeled points
        TrainingDivergedError: If a loss becomes non-finite
    """
    if training_set.N == 0:
        raise ValueError("Training set has no labeled points")
    params = params or training_set.params
    weights = config.weights
    # Physics terms are evaluated for the history even when their weights are zero
    use_physics = training_set.N_c > 0

    generator = torch.Generator().manual_seed(config.seed)
    model = init_model(
        config.hidden_widths, training_set.box(), training_set.outputs, config.seed, OUTPUT_NAMES
    )
    net = to_module(model)

    inputs = torch.as_tensor(training_set.inputs, dtype=torch.float64)
    outputs = torch.as_tensor(training_set.outputs, dtype=torch.float64)
    train_idx, val_idx = _split(len(inputs), config.validation_split, generator)
    points = torch.as_tensor(training_set.collocation, dtype=torch.float64)
    v_t = torch.as_tensor(training_set.collocation_v_t, dtype=torch.float64)

    optimizer = torch.optim.Adam(
        net.parameters(), lr=config.learning_rate, betas=(0.9, 0.999), eps=1e-8
    )
    scheduler = torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=config.lr_decay)

    history = TrainingHistory()
    # The initial parameters are the first checkpoint (best_epoch = -1)
    initial = _validation_report(
        net, inputs, outputs, val_idx, train_idx, points, v_t, params, weights
    )
    best_total = initial.total if initial.is_finite() else float("inf")
    best_state = copy.deepcopy(net.state_dict())
    colloc_cursor = 0
    colloc_perm = torch.randperm(len(points), generator=generator) if use_physics else None

    logger.info(
        f"Training {model.widths} network for {config.epochs} epochs on N={training_set.N}, N_c={training_set.N_c}",
        extra={"pipeline_event": "train_start", "seed": config.seed},
    )
    epochs = range(config.epochs)
    if config.show_progress:
        epochs = tqdm(epochs, desc="Training", unit="epoch")
    for epoch in epochs:
        net.train()
        order = train_idx[torch.randperm(len(train_idx), generator=generator)]
        sums = None
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            colloc_pts = colloc_vt = None
            if use_physics:
                if colloc_cursor + config.collocation_batch_size > len(colloc_perm):
                    colloc_perm = torch.randperm(len(points), generator=generator)
                    colloc_cursor = 0
                sel = colloc_perm[colloc_cursor : colloc_cursor + config.collocation_batch_size]
                colloc_cursor += config.collocation_batch_size
                colloc_pts, colloc_vt = points[sel], v_t[sel]

            terms = loss_terms(net, inputs[batch], outputs[batch], colloc_pts, colloc_vt, params)
            total = weighted_total(terms, weights)
            if not torch.isfinite(total):
                raise TrainingDivergedError(
                    f"Non-finite loss at epoch {epoch}", operation="pinn.train", epoch=epoch
                )
            optimizer.zero_grad()
            total.backward()
            optimizer.step()

            detached = [t.detach() for t in terms]
            if sums is None:
                sums = detached
            else:
                sums = [s + d for s, d in zip(sums, detached, strict=True)]
            n_batches += 1
        scheduler.step()

        history.train.append(report_from_terms([s / n_batches for s in sums], weights))
        val_report = _validation_report(
            net, inputs, outputs, val_idx, train_idx, points, v_t, params, weights
        )
        if not val_report.is_finite():
            raise TrainingDivergedError(
                f"Non-finite validation loss at epoch {epoch}", operation="pinn.train", epoch=epoch
            )
        history.validation.append(val_report)
        if val_report.total < best_total:
            best_total = val_report.total
            best_state = copy.deepcopy(net.state_dict())
            history.best_epoch = epoch
        if epoch % max(1, config.epochs // 10) == 0:
            logger.debug(
                f"Epoch {epoch}: train={history.train[-1].total:.4e} validation={val_report.total:.4e}"
            )

    net.load_state_dict(best_state)
    best = from_module(net)
    logger.info(
        f"Training finished: best validation total {best_total:.4e} at epoch {history.best_epoch}",
        extra={"pipeline_event": "train_done", "best_epoch": history.best_epoch},
    )
    return best, history


def _validation_report(
    net, inputs, outputs, val_idx, train_idx, points, v_t, params, weights
) -> LossReport:
    idx = val_idx if len(val_idx) else train_idx
    with_physics = len(points) > 0
    net.eval()
    with torch.enable_grad():
        terms = loss_terms(
            net,
            inputs[idx],
            outputs[idx],
            points if with_physics else None,
            v_t if with_physics else None,
            params,
        )
    return report_from_terms(terms, weights)


def labeled_mse(model: MlpModel, training_set: TrainingSet) -> dict[str, float]:
    """Raw-unit mean squared error of every output on the labeled points."""
    predicted = forward(model, training_set.inputs)
    errors = np.mean((predicted - training_set.outputs) ** 2, axis=0)
    return {name: float(e) for name, e in zip(model.output_names, errors, strict=True)}
