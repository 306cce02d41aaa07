"""PGD attack under an L-infinity budget, plus dataset-level pair harvesting.

Untargeted: each step maximizes the cross-entropy loss of the true label,
x <- clip(x + alpha * sign(grad), [benign - eps, benign + eps]) then clip to
[0, 1]. Per-image PRNG streams are derived from (seed, image index) so batch
order never changes results.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .nn.model import forward_batch, input_gradient_batch


@dataclass(frozen=True)
class AttackConfig:
    steps: int = 7
    eps: float = 8 / 255
    alpha: float = 2 / 255
    random_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.steps <= 0:
            raise InvalidInputError("steps must be positive")
        if not 0 <= self.eps < 1:
            raise InvalidInputError("eps must be in [0, 1)")
        if not 0 <= self.alpha <= self.eps:
            raise InvalidInputError("alpha must satisfy 0 <= alpha <= eps")


def _random_starts(images, config, image_indices):
    noise = np.empty_like(images)
    for row, idx in enumerate(image_indices):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(int(idx),))
        )
        noise[row] = rng.uniform(-config.eps, config.eps, images[row].shape)
    return np.clip(images + noise, 0.0, 1.0)


def pgd_attack_batch(model, images, labels, config, image_indices=None):
    """Attack (N, H, W, 3) images; returns (adversarial, success mask)."""
    images = np.asarray(images, dtype=model.dtype)
    labels = np.asarray(labels, dtype=np.int64)
    if image_indices is None:
        image_indices = np.arange(len(labels))
    if config.eps == 0:
        adv = images.copy()
    else:
        adv = _random_starts(images, config, image_indices) if config.random_start else images.copy()
        lo = np.clip(images - config.eps, 0.0, 1.0)
        hi = np.clip(images + config.eps, 0.0, 1.0)
        for _ in range(config.steps):
            grad = input_gradient_batch(model, adv, labels)
            adv = adv + config.alpha * np.sign(grad)
            adv = np.clip(adv, lo, hi)
    success = forward_batch(model, adv).predicted_labels != labels
    return adv, success


def pgd_attack(model, image, true_label, config, image_index=0):
    """Single-image PGD; returns (adversarial image, success flag)."""
    adv, success = pgd_attack_batch(
        model, np.asarray(image)[None], [int(true_label)], config, [image_index]
    )
    return adv[0], bool(success[0])


def attack_dataset(model, images, labels, config, batch_size=256):
    """Attack every correctly-classified image; keep only flipped ones.

    Returns a list of InstancePair covering images that were (a) predicted
    correctly when benign and (b) successfully flipped by the attack. Pair
    ids are the indices into ``images``.
    """
    from .workspace import InstancePair

    images = np.asarray(images, dtype=model.dtype)
    labels = np.asarray(labels, dtype=np.int64)
    pairs = []
    for start in range(0, len(images), batch_size):
        chunk = slice(start, start + batch_size)
        benign_out = forward_batch(model, images[chunk])
        correct = benign_out.predicted_labels == labels[chunk]
        if not correct.any():
            continue
        idx = np.flatnonzero(correct) + start
        adv, success = pgd_attack_batch(
            model, images[idx], labels[idx], config, image_indices=idx
        )
        adv_out = forward_batch(model, adv)
        for row, image_id in enumerate(idx):
            if not success[row]:
                continue
            delta = adv[row] - images[image_id]
            pairs.append(
                InstancePair(
                    id=int(image_id),
                    benign=images[image_id].copy(),
                    adversarial=adv[row],
                    y=int(labels[image_id]),
                    adv_label=int(adv_out.predicted_labels[row]),
                    p_benign=benign_out.probabilities[image_id - start].copy(),
                    p_adv=adv_out.probabilities[row].copy(),
                    l2=float(np.sqrt(np.sum(delta.astype(np.float64) ** 2))),
                )
            )
    return pairs
