from .layers import cross_entropy, softmax
from .model import (
    ConvSpec,
    DnnConfig,
    DnnModel,
    InceptionSpec,
    Prediction,
    ShapeError,
    load_model,
    save_model,
)
from .train import accuracy, dataset_loss, grad_check, grad_check_by_layer, train

__all__ = [
    "ConvSpec",
    "DnnConfig",
    "DnnModel",
    "InceptionSpec",
    "Prediction",
    "ShapeError",
    "softmax",
    "cross_entropy",
    "save_model",
    "load_model",
    "train",
    "dataset_loss",
    "accuracy",
    "grad_check",
    "grad_check_by_layer",
]
