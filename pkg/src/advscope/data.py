"""Datasets: the synthetic shapes generator and the CIFAR-10 binary loader."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError

SHAPE_CLASSES = ("circle", "square", "triangle", "cross")
CIFAR10_CLASSES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)
NOISE_SIGMA = 0.05


@dataclass
class Dataset:
    images: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    class_names: tuple

    def __len__(self):
        return len(self.images)


def _shape_mask(kind, size, cx, cy, r):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    if kind == "circle":
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= r**2
    if kind == "square":
        return (np.abs(xx - cx) <= r) & (np.abs(yy - cy) <= r)
    if kind == "triangle":
        # upward triangle: apex (cx, cy - r), base corners (cx -+ r, cy + r)
        inside = yy <= cy + r
        half_width = (yy - (cy - r)) / 2.0
        return inside & (yy >= cy - r) & (np.abs(xx - cx) <= half_width)
    if kind == "cross":
        arm = max(r * 0.35, 1.0)
        horiz = (np.abs(yy - cy) <= arm) & (np.abs(xx - cx) <= r)
        vert = (np.abs(xx - cx) <= arm) & (np.abs(yy - cy) <= r)
        return horiz | vert
    raise InvalidInputError(f"unknown shape {kind!r}")


def generate_shapes_dataset(seed, count_per_class, image_size=32):
    """Deterministic labeled dataset of one filled shape per image.

    Uniform random background color, random center/scale, a contrasting
    shape color, additive Gaussian noise (sigma 0.05), clipped to [0, 1].
    """
    if image_size < 16:
        raise InvalidInputError("image_size must be >= 16")
    if count_per_class < 0:
        raise InvalidInputError("count_per_class must be >= 0")
    rng = np.random.default_rng(seed)
    n = count_per_class * len(SHAPE_CLASSES)
    images = np.empty((n, image_size, image_size, 3), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    row = 0
    for label, kind in enumerate(SHAPE_CLASSES):
        for _ in range(count_per_class):
            background = rng.uniform(0.0, 1.0, 3)
            # push the shape color away from the background on every channel
            color = np.where(
                background > 0.5,
                background - rng.uniform(0.35, 0.6, 3),
                background + rng.uniform(0.35, 0.6, 3),
            )
            r = rng.uniform(image_size * 0.18, image_size * 0.32)
            cx = rng.uniform(r, image_size - r)
            cy = rng.uniform(r, image_size - r)
            mask = _shape_mask(kind, image_size, cx, cy, r)
            img = np.broadcast_to(background, (image_size, image_size, 3)).copy()
            img[mask] = color
            img += rng.normal(0.0, NOISE_SIGMA, img.shape)
            images[row] = np.clip(img, 0.0, 1.0).astype(np.float32)
            labels[row] = label
            row += 1
    return Dataset(images, labels, SHAPE_CLASSES)


def _load_cifar10_file(path):
    raw = Path(path).read_bytes()
    record = 3073  # 1 label byte + 3 * 1024 channel bytes
    if len(raw) == 0 or len(raw) % record:
        raise FormatError(f"{path}: size {len(raw)} is not a multiple of {record}")
    data = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record)
    labels = data[:, 0].astype(np.int64)
    if labels.max() >= 10:
        raise FormatError(f"{path}: label byte out of range")
    pixels = data[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return (pixels.astype(np.float32) / 255.0), labels


def load_cifar10(path):
    """Load CIFAR-10 binary batches from a file or a directory of *.bin files."""
    path = Path(path)
    files = sorted(path.glob("*.bin")) if path.is_dir() else [path]
    if not files:
        raise FormatError(f"no .bin files under {path}")
    parts = [_load_cifar10_file(f) for f in files]
    return Dataset(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        CIFAR10_CLASSES,
    )


def split_dataset(dataset, test_fraction=0.2, seed=0):
    """Seeded train/test split; returns (train_idx, test_idx)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    order = rng.permutation(len(dataset))
    n_test = int(round(len(dataset) * test_fraction))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def save_dataset(dataset, path, seed=0, test_fraction=0.2):
    train_idx, test_idx = split_dataset(dataset, test_fraction, seed)
    np.savez_compressed(
        path,
        images=dataset.images,
        labels=dataset.labels,
        class_names=np.array(dataset.class_names),
        train_idx=train_idx,
        test_idx=test_idx,
    )


def load_dataset(path):
    try:
        with np.load(path, allow_pickle=False) as z:
            dataset = Dataset(
                z["images"], z["labels"], tuple(str(c) for c in z["class_names"])
            )
            return dataset, z["train_idx"], z["test_idx"]
    except (OSError, KeyError, ValueError) as exc:
        raise FormatError(f"unreadable dataset archive {path}: {exc}") from None
