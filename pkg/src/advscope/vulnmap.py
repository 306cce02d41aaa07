"""Vulnerability maps by region substitution, binarization, IoU and the
image-perturbation neuron ranking.

For every stride-lattice position the 2k x 2k window of the benign image is
overwritten with the adversarial pixels (clamped at borders), the model is
re-run, and the class-probability (or logit) deltas are recorded:
b_map = f(sub)[bId] - f(benign)[bId], a_map = f(benign)[aId] - f(sub)[aId].
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidInputError
from .nn.model import forward, forward_batch
from .rf import receptive_field

VALUE_SPACES = ("probability", "logit")
DEFAULT_REGION = 2
DEFAULT_STRIDE = 1
DEFAULT_TOP_FRACTION = 0.20


@dataclass
class VulnerabilityMap:
    b_map: np.ndarray  # (gh, gw) float32, benign-class delta per lattice cell
    a_map: np.ndarray  # (gh, gw) float32, adversarial-class delta
    k: int
    s: int
    value_space: str
    image_shape: tuple  # (h, w)


def vulnerability_maps(model, pair, k=DEFAULT_REGION, s=DEFAULT_STRIDE,
                       value_space="probability", batch_size=256):
    """Exhaustive region-substitution maps over the stride-s lattice."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    h, w = pair.benign.shape[:2]
    if not 1 <= s <= min(h, w):
        raise InvalidInputError("s must be in [1, min(w, h)]")
    if value_space not in VALUE_SPACES:
        raise InvalidInputError(f"value_space must be one of {VALUE_SPACES}")
    rows = range(0, h, s)
    cols = range(0, w, s)
    base = forward(model, pair.benign)
    base_val = base.probabilities if value_space == "probability" else base.logits
    positions = [(i, j) for i in rows for j in cols]
    b_map = np.zeros((len(rows), len(cols)), dtype=np.float32)
    a_map = np.zeros_like(b_map)
    for start in range(0, len(positions), batch_size):
        chunk = positions[start : start + batch_size]
        batch = np.repeat(pair.benign[None], len(chunk), axis=0)
        for row, (i, j) in enumerate(chunk):
            top, bottom = max(0, i - k), min(h, i + k)
            left, right = max(0, j - k), min(w, j + k)
            batch[row, top:bottom, left:right] = pair.adversarial[top:bottom, left:right]
        out = forward_batch(model, batch)
        vals = out.probabilities if value_space == "probability" else out.logits
        for row, (i, j) in enumerate(chunk):
            gi, gj = i // s, j // s
            b_map[gi, gj] = vals[row, pair.y] - base_val[pair.y]
            a_map[gi, gj] = base_val[pair.adv_label] - vals[row, pair.adv_label]
    return VulnerabilityMap(b_map, a_map, k, s, value_space, (h, w))


def vulnerability_score(vmap, which):
    """Nonnegative 'more = more vulnerable' grid at full image resolution."""
    if which not in ("benign", "adversarial"):
        raise InvalidInputError("which must be 'benign' or 'adversarial'")
    raw = vmap.b_map if which == "benign" else vmap.a_map
    score = np.maximum(-raw, 0.0)
    if vmap.s == 1:
        return score.astype(np.float64)
    h, w = vmap.image_shape
    rows = np.minimum(np.round(np.arange(h) / vmap.s).astype(int), score.shape[0] - 1)
    cols = np.minimum(np.round(np.arange(w) / vmap.s).astype(int), score.shape[1] - 1)
    return score[np.ix_(rows, cols)].astype(np.float64)


def binarize_top_q(score, q):
    """Binary mask of the q-fraction highest-score pixels (row-major ties)."""
    if not 0 < q <= 1:
        raise InvalidInputError("q must be in (0, 1]")
    flat = np.asarray(score, dtype=np.float64).ravel()
    count = int(round(q * flat.size))
    mask = np.zeros(flat.size, dtype=np.uint8)
    if count:
        order = np.argsort(-flat, kind="stable")
        mask[order[:count]] = 1
    return mask.reshape(score.shape)


def iou(mask_a, mask_b):
    """Intersection over union of two binary masks; 0 when both are empty."""
    a = np.asarray(mask_a).astype(bool)
    b = np.asarray(mask_b).astype(bool)
    if a.shape != b.shape:
        raise InvalidInputError("masks must share one shape")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def rank_neurons_by_iou(model, pair, vmap, which, threshold=0.5,
                        q=DEFAULT_TOP_FRACTION, trace=None):
    """Descending IoU of each neuron's benign RF against the binarized map."""
    if trace is None:
        trace = forward(model, pair.benign)
    target = binarize_top_q(vulnerability_score(vmap, which), q)
    n = trace.last_conv_maps.shape[0]
    scores = []
    for neuron in range(n):
        r = receptive_field(trace, neuron, pair.benign, rf_size=target.shape[0],
                            threshold=threshold)
        scores.append((neuron, iou(r.mask, target)))
    scores.sort(key=lambda t: (-t[1], t[0]))
    return scores


# ---------------------------------------------------------------------------
# disk cache: vuln_{pair}_{k}_{s}_{space}.bin

_MAGIC = b"VMAP1\x00"


def cache_filename(pair_id, k, s, value_space):
    return f"vuln_{pair_id}_{k}_{s}_{value_space}.bin"


def save_map(vmap, path):
    gh, gw = vmap.b_map.shape
    space = VALUE_SPACES.index(vmap.value_space)
    header = struct.pack(
        "<6sIIIIIII", _MAGIC, vmap.k, vmap.s, space, gh, gw,
        vmap.image_shape[0], vmap.image_shape[1],
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(vmap.b_map, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(vmap.a_map, dtype="<f4").tobytes())


def load_map(path):
    with open(path, "rb") as f:
        raw = f.read()
    head = struct.calcsize("<6sIIIIIII")
    if len(raw) < head:
        raise FormatError(f"{path}: truncated header")
    magic, k, s, space, gh, gw, h, w = struct.unpack_from("<6sIIIIIII", raw)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic")
    if len(raw) != head + 2 * gh * gw * 4:
        raise FormatError(f"{path}: grid bytes do not match header")
    grids = np.frombuffer(raw, dtype="<f4", offset=head).reshape(2, gh, gw)
    return VulnerabilityMap(
        grids[0].copy(), grids[1].copy(), k, s, VALUE_SPACES[space], (h, w)
    )
