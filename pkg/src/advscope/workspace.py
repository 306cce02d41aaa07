"""The instance store: benign/adversarial pairs, run archives on disk, the
prediction matrix, image-grid sorting and 2D projections.

Run directory layout: ``manifest.json`` (model path, attack settings, class
names, per-pair metadata) plus ``images.bin`` (all benign images then all
adversarial images, little-endian float32, in manifest pair order). A
``cache/`` subdirectory holds precomputed artifacts.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .nn.model import forward_batch
from .projection import pca_2d, tsne_2d

SORT_MEASURES = ("l2_asc", "l2_desc", "p_benign_desc", "p_adv_asc")


@dataclass
class InstancePair:
    id: int
    benign: np.ndarray  # (H, W, 3) float32
    adversarial: np.ndarray
    y: int
    adv_label: int
    p_benign: np.ndarray  # (c,)
    p_adv: np.ndarray
    l2: float


def validate_pair(pair, eps=None):
    """Re-check InstancePair invariants (used for tamper detection on load)."""
    if int(np.argmax(pair.p_benign)) != pair.y:
        raise FormatError(f"pair {pair.id}: benign probabilities do not argmax to y")
    if int(np.argmax(pair.p_adv)) != pair.adv_label or pair.adv_label == pair.y:
        raise FormatError(f"pair {pair.id}: adversarial label inconsistent")
    delta = pair.adversarial.astype(np.float64) - pair.benign.astype(np.float64)
    if abs(np.sqrt((delta**2).sum()) - pair.l2) > 1e-5:
        raise FormatError(f"pair {pair.id}: stored l2 does not match images")
    if eps is not None and np.abs(delta).max() > eps + 1e-6:
        raise FormatError(f"pair {pair.id}: perturbation exceeds the attack budget")


def save_run(run_dir, pairs, class_names, attack_config, model_path):
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "model_path": str(model_path),
        "attack": {
            "steps": attack_config.steps,
            "eps": attack_config.eps,
            "alpha": attack_config.alpha,
            "seed": attack_config.seed,
            "random_start": attack_config.random_start,
        },
        "class_names": list(class_names),
        "pairs": [
            {
                "id": p.id,
                "y": p.y,
                "adv_label": p.adv_label,
                "p_benign": [float(v) for v in p.p_benign],
                "p_adv": [float(v) for v in p.p_adv],
                "l2": p.l2,
            }
            for p in pairs
        ],
    }
    with open(run_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, separators=(",", ":"))
    blobs = [np.ascontiguousarray(p.benign, dtype="<f4") for p in pairs]
    blobs += [np.ascontiguousarray(p.adversarial, dtype="<f4") for p in pairs]
    with open(run_dir / "images.bin", "wb") as f:
        for b in blobs:
            f.write(b.tobytes())


class Workspace:
    """A loaded run: model, pairs and derived read-only artifacts."""

    def __init__(self, model, pairs, class_names, attack, run_dir=None):
        self.model = model
        self.pairs = list(pairs)
        self.class_names = tuple(class_names)
        self.attack = dict(attack)
        self.run_dir = Path(run_dir) if run_dir else None
        self._by_id = {p.id: p for p in self.pairs}
        self._pooled = {}

    @classmethod
    def load(cls, run_dir, model=None):
        run_dir = Path(run_dir)
        try:
            manifest = json.loads((run_dir / "manifest.json").read_text("utf-8"))
        except FileNotFoundError:
            raise FormatError(f"{run_dir}: missing manifest.json") from None
        except json.JSONDecodeError as exc:
            raise FormatError(f"{run_dir}: bad manifest: {exc}") from None
        if model is None:
            from .nn.io import load_model

            model_path = Path(manifest["model_path"])
            if not model_path.is_absolute():
                model_path = run_dir / model_path
            model = load_model(model_path)
        h, w, c = model.spec.input_shape
        per_image = h * w * c
        raw = np.fromfile(run_dir / "images.bin", dtype="<f4")
        n = len(manifest["pairs"])
        if raw.size != 2 * n * per_image:
            raise FormatError(f"{run_dir}: images.bin size does not match manifest")
        images = raw.reshape(2 * n, h, w, c)
        pairs = []
        for i, meta in enumerate(manifest["pairs"]):
            pairs.append(
                InstancePair(
                    id=int(meta["id"]),
                    benign=images[i],
                    adversarial=images[n + i],
                    y=int(meta["y"]),
                    adv_label=int(meta["adv_label"]),
                    p_benign=np.array(meta["p_benign"], dtype=np.float32),
                    p_adv=np.array(meta["p_adv"], dtype=np.float32),
                    l2=float(meta["l2"]),
                )
            )
        ws = cls(model, pairs, manifest["class_names"], manifest["attack"], run_dir)
        eps = manifest["attack"]["eps"]
        for p in pairs:
            validate_pair(p, eps=eps)
        return ws

    def pair(self, pair_id):
        from .errors import NotFoundError

        if pair_id not in self._by_id:
            raise NotFoundError(f"unknown pair id {pair_id}")
        return self._by_id[pair_id]

    def pooled_matrix(self, side):
        """(num_pairs, n) pooled activations for 'benign' or 'adversarial'."""
        if side not in self._pooled:
            images = np.stack(
                [getattr(p, "benign" if side == "benign" else "adversarial") for p in self.pairs]
            )
            self._pooled[side] = forward_batch(self.model, images).pooled
        return self._pooled[side]


def build_prediction_matrix(pairs, class_count):
    """(c, c) counts: row = true label, column = adversarial label."""
    matrix = np.zeros((class_count, class_count), dtype=np.int64)
    for p in pairs:
        matrix[p.y, p.adv_label] += 1
    return matrix


def sort_pairs(pairs, measure):
    """Stable total order of pair ids under one of the four grid measures."""
    if measure not in SORT_MEASURES:
        raise InvalidInputError(f"measure must be one of {SORT_MEASURES}")
    if measure == "l2_asc":
        key = lambda p: (p.l2, p.id)
    elif measure == "l2_desc":
        key = lambda p: (-p.l2, p.id)
    elif measure == "p_benign_desc":
        key = lambda p: (-float(p.p_benign[p.y]), p.id)
    else:  # p_adv_asc
        key = lambda p: (float(p.p_adv[p.adv_label]), p.id)
    return [p.id for p in sorted(pairs, key=key)]


@dataclass
class ProjectionResult:
    benign: np.ndarray  # (num_pairs, 2)
    adversarial: np.ndarray
    method: str
    seed: int


def project_pairs(workspace, method="pca", seed=0):
    """Project benign and adversarial pooled activations to 2D independently."""
    if method not in ("pca", "tsne"):
        raise InvalidInputError("method must be 'pca' or 'tsne'")
    if len(workspace.pairs) < 3:
        raise InvalidInputError("projection needs at least 3 pairs")
    coords = {}
    for side in ("benign", "adversarial"):
        feats = workspace.pooled_matrix(side)
        coords[side] = pca_2d(feats) if method == "pca" else tsne_2d(feats, seed=seed)
        if not np.isfinite(coords[side]).all():
            raise InvalidInputError("projection produced non-finite coordinates")
    return ProjectionResult(coords["benign"], coords["adversarial"], method, seed)
