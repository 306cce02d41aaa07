"""Receptive fields of last-conv neurons: resize, threshold, mask, retrieve.

The four-step extraction: bilinearly resize the input image and the neuron's
feature map to the RF size, binarize the resized map at a threshold relative
to its maximum, then mask the resized image with the binary map. Negative
activations are clamped at zero before thresholding.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .nn.model import forward


def bilinear_resize(array, out_h, out_w):
    """Bilinear resample with half-pixel-centered sampling; (H, W[, C]) input."""
    a = np.asarray(array, dtype=np.float64)
    h, w = a.shape[:2]
    if (h, w) == (out_h, out_w):
        return a.copy()
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)
    if a.ndim == 3:
        wy_ = wy[:, None, None]
        wx_ = wx[None, :, None]
    else:
        wy_ = wy[:, None]
        wx_ = wx[None, :]
    r0 = a[y0][:, x0] * (1 - wx_) + a[y0][:, x1] * wx_
    r1 = a[y1][:, x0] * (1 - wx_) + a[y1][:, x1] * wx_
    return r0 * (1 - wy_) + r1 * wy_


@dataclass
class ReceptiveField:
    mask: np.ndarray  # (rf, rf) uint8
    image: np.ndarray  # (rf, rf, 3) float64, zero outside the mask
    neuron: int
    threshold: float
    dead: bool


def receptive_field(trace, neuron, image, rf_size=None, threshold=0.5):
    """RF mask and masked image for one neuron of a ForwardTrace."""
    n = trace.last_conv_maps.shape[0]
    if not 0 <= neuron < n:
        raise InvalidInputError(f"neuron must be in [0, {n})")
    if not 0 < threshold <= 1:
        raise InvalidInputError("threshold must be in (0, 1]")
    fmap = np.maximum(trace.last_conv_maps[neuron], 0.0)
    if rf_size is None:
        rf_size = image.shape[0]
    if rf_size < fmap.shape[0]:
        raise InvalidInputError("rf_size must be >= the feature-map size")
    resized_map = bilinear_resize(fmap, rf_size, rf_size)
    resized_img = bilinear_resize(image, rf_size, rf_size)
    peak = resized_map.max()
    if peak > 0:
        mask = (resized_map >= threshold * peak).astype(np.uint8)
        dead = False
    else:
        mask = np.zeros((rf_size, rf_size), dtype=np.uint8)
        dead = True
    return ReceptiveField(
        mask=mask,
        image=resized_img * mask[:, :, None],
        neuron=neuron,
        threshold=threshold,
        dead=dead,
    )


def mask_union(masks):
    masks = list(masks)
    _check_same_shape(masks)
    out = masks[0].astype(bool)
    for m in masks[1:]:
        out = out | m.astype(bool)
    return out.astype(np.uint8)


def mask_intersection(masks):
    masks = list(masks)
    _check_same_shape(masks)
    out = masks[0].astype(bool)
    for m in masks[1:]:
        out = out & m.astype(bool)
    return out.astype(np.uint8)


def _check_same_shape(masks):
    if not masks:
        raise InvalidInputError("need at least one mask")
    shape = masks[0].shape
    if any(m.shape != shape for m in masks):
        raise InvalidInputError("masks must share one shape")


def rle_encode(mask):
    """Row-major run lengths, starting with a (possibly zero) run of zeros."""
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    runs = []
    current, length = 0, 0
    for v in flat:
        if v == current:
            length += 1
        else:
            runs.append(length)
            current, length = v, 1
    runs.append(length)
    return {"shape": list(mask.shape), "runs": runs}


def rle_decode(payload):
    flat = np.zeros(int(np.prod(payload["shape"])), dtype=np.uint8)
    pos, value = 0, 0
    for run in payload["runs"]:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    if pos != flat.size:
        raise InvalidInputError("run lengths do not cover the mask")
    return flat.reshape(payload["shape"])


def context_images(model, neuron, pairs, sort="activation", m=6, rf_size=None,
                   threshold=0.5):
    """Top-m context pairs for a neuron, with benign and adversarial RFs.

    Selection runs on the benign images only (by the neuron's pooled
    activation or by benign-label confidence, descending, ties by pair id);
    both sides' RFs of the selected pairs are returned.
    """
    if sort not in ("activation", "confidence"):
        raise InvalidInputError("sort must be 'activation' or 'confidence'")
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    scored = []
    for pair in pairs:
        trace = forward(model, pair.benign)
        score = (
            float(trace.pooled[neuron])
            if sort == "activation"
            else float(pair.p_benign[pair.y])
        )
        scored.append((score, pair, trace))
    scored.sort(key=lambda t: (-t[0], t[1].id))
    out = []
    for score, pair, trace_b in scored[:m]:
        trace_a = forward(model, pair.adversarial)
        out.append(
            (
                pair.id,
                receptive_field(trace_b, neuron, pair.benign, rf_size, threshold),
                receptive_field(trace_a, neuron, pair.adversarial, rf_size, threshold),
            )
        )
    return out
