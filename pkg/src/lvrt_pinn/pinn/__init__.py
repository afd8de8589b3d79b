"""Physics-informed ReLU network: model, losses, training and model files."""

from lvrt_pinn.pinn.model import (
    AffineScaling,
    MlpModel,
    ReluNetwork,
    forward,
    forward_dt,
    from_module,
    init_model,
    pre_activations,
    predict,
    to_module,
)
from lvrt_pinn.pinn.physics import LossReport, LossWeights, algebraic_relations, grad, loss
from lvrt_pinn.pinn.serialization import (
    load_model,
    model_from_dict,
    model_hash,
    model_to_dict,
    save_model,
)
from lvrt_pinn.pinn.training import TrainConfig, TrainingHistory, labeled_mse, train

__all__ = [
    "AffineScaling",
    "LossReport",
    "LossWeights",
    "MlpModel",
    "ReluNetwork",
    "TrainConfig",
    "TrainingHistory",
    "algebraic_relations",
    "forward",
    "forward_dt",
    "from_module",
    "grad",
    "init_model",
    "labeled_mse",
    "load_model",
    "loss",
    "model_from_dict",
    "model_hash",
    "model_to_dict",
    "pre_activations",
    "predict",
    "save_model",
    "to_module",
    "train",
]
