from .io import load_model, save_model
from .model import (
    BatchNorm,
    BatchOutputs,
    Conv2d,
    Dense,
    ForwardTrace,
    GlobalAvgPool,
    MaxPool,
    Model,
    ModelSpec,
    ReLU,
    forward,
    forward_batch,
    input_gradient,
    input_gradient_batch,
    mininet,
    softmax,
)
from .train import TrainConfig, accuracy, train

__all__ = [
    "BatchNorm", "BatchOutputs", "Conv2d", "Dense", "ForwardTrace",
    "GlobalAvgPool", "MaxPool", "Model", "ModelSpec", "ReLU", "TrainConfig",
    "accuracy", "forward", "forward_batch", "input_gradient",
    "input_gradient_batch", "load_model", "mininet", "save_model", "softmax",
    "train",
]
