"""Workbench for interpreting PGD attacks on small CNNs: train or load a
model, attack it, then locate the vulnerable last-conv neurons via image
substitution maps, confidence band gaps, receptive fields and clustering.
"""

from .attack import AttackConfig, attack_dataset, pgd_attack, pgd_attack_batch
from .errors import (
    AdvscopeError,
    FormatError,
    InsufficientMembersError,
    InvalidInputError,
    NotFoundError,
    TrainingDivergedError,
)
from .kernels import BACKEND
from .nn.io import load_model, save_model
from .nn.model import Model, ModelSpec, forward, forward_batch, mininet
from .nn.train import TrainConfig, accuracy, train
from .workspace import InstancePair, Workspace, save_run

__version__ = "0.1.0"

__all__ = [
    "AdvscopeError", "AttackConfig", "BACKEND", "FormatError",
    "InstancePair", "InsufficientMembersError", "InvalidInputError",
    "Model", "ModelSpec", "NotFoundError", "TrainConfig",
    "TrainingDivergedError", "Workspace", "accuracy", "attack_dataset",
    "forward", "forward_batch", "load_model", "mininet", "pgd_attack",
    "pgd_attack_batch", "save_model", "save_run", "train",
]
