"""SGD training with momentum; deterministic given the config seed."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, TrainingDivergedError
from .model import Model, cross_entropy_and_grads, forward_batch

BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise InvalidInputError("epochs must be >= 0, batch size and lr positive")
        if not 0 <= self.momentum < 1:
            raise InvalidInputError("momentum must be in [0, 1)")


def accuracy(model, images, labels, batch_size=256):
    hits = 0
    for start in range(0, len(images), batch_size):
        out = forward_batch(model, images[start : start + batch_size])
        hits += int((out.predicted_labels == labels[start : start + batch_size]).sum())
    return hits / max(len(images), 1)


def train(model, images, labels, config, test_images=None, test_labels=None,
          log=None):
    """Train ``model`` in place on (N, H, W, 3) images; returns history.

    History is one dict per epoch with loss and train/test accuracy. Raises
    TrainingDivergedError on a non-finite loss.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise InvalidInputError("dataset is empty")
    if labels.min() < 0 or labels.max() >= model.spec.class_count:
        raise InvalidInputError("label out of range")
    rng = np.random.default_rng(config.seed)
    x_all = np.ascontiguousarray(
        np.asarray(images, dtype=model.dtype).transpose(0, 3, 1, 2)
    )
    velocity = [{k: np.zeros_like(v) for k, v in p.items()} for p in model.params]
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(images))
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(order), config.batch_size):
            sel = order[start : start + config.batch_size]
            loss, pgrads, _, caches = cross_entropy_and_grads(
                model, x_all[sel], labels[sel], training=len(sel) > 1
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss} at epoch {epoch}")
            epoch_loss += loss
            batches += 1
            for p, v, g in zip(model.params, velocity, pgrads):
                if g is None:
                    continue
                for key, grad in g.items():
                    v[key] = config.momentum * v[key] - config.learning_rate * grad
                    p[key] += v[key]
            for cache in caches:
                if cache[0] == "batchnorm" and cache[5]:
                    _, _, _, _, p, _, mu, var = cache
                    p["running_mean"] += BN_MOMENTUM * (mu - p["running_mean"])
                    p["running_var"] += BN_MOMENTUM * (var - p["running_var"])
        record = {
            "epoch": epoch,
            "loss": epoch_loss / max(batches, 1),
            "train_accuracy": accuracy(model, images, labels),
        }
        if test_images is not None:
            record["test_accuracy"] = accuracy(model, test_images, test_labels)
        history.append(record)
        if log:
            log(record)
    return history
