"""Small numpy neural-network stack with reverse-mode gradients and equivariant layers."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    Dropout,
    GridEncode,
    GridReadout,
    Linear,
    Module,
    MSELoss,
    Param,
    PELinear,
    ReLU,
    Sequential,
)
from .models import Model, ModelConfig, build_model, default_config
from .optim import Adam, adam_step
from .train import TrainHyper, TrainResult, predict, train

__all__ = [
    "Adam",
    "Dropout",
    "GridEncode",
    "GridReadout",
    "Linear",
    "MSELoss",
    "Model",
    "ModelConfig",
    "Module",
    "PELinear",
    "Param",
    "ReLU",
    "Sequential",
    "TrainHyper",
    "TrainResult",
    "adam_step",
    "build_model",
    "default_config",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "train",
]
