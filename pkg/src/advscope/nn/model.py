"""Minimal CNN engine: layer specs, forward/backward passes, traces.

Images at the public boundary are (H, W, 3) float arrays in [0, 1]; internally
everything runs in NCHW. Parameters are stored float32; reductions (pooling,
softmax normalization) accumulate in float64. Casting a model to float64 via
``Model.astype`` gives the fully 64-bit mode used by gradient checks.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import InvalidInputError


# ---------------------------------------------------------------------------
# layer descriptors


@dataclass(frozen=True)
class Conv2d:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    pad: int = 1
    kind: str = field(default="conv2d", init=False)


@dataclass(frozen=True)
class BatchNorm:
    channels: int
    eps: float = 1e-5
    kind: str = field(default="batchnorm", init=False)


@dataclass(frozen=True)
class ReLU:
    kind: str = field(default="relu", init=False)


@dataclass(frozen=True)
class MaxPool:
    kernel: int = 2
    stride: int = 2
    kind: str = field(default="maxpool", init=False)


@dataclass(frozen=True)
class GlobalAvgPool:
    kind: str = field(default="globalavgpool", init=False)


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int
    kind: str = field(default="dense", init=False)


_LAYER_TYPES = {
    "conv2d": Conv2d,
    "batchnorm": BatchNorm,
    "relu": ReLU,
    "maxpool": MaxPool,
    "globalavgpool": GlobalAvgPool,
    "dense": Dense,
}


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; immutable and shape-checked on creation."""

    layers: tuple
    input_shape: tuple  # (H, W, 3)
    class_count: int
    class_names: tuple = ()

    def __post_init__(self):
        if self.class_names and len(self.class_names) != self.class_count:
            raise InvalidInputError("class_names length must equal class_count")
        self.infer_shapes()  # validates composition

    def infer_shapes(self):
        """Per-layer output shapes as (C, H, W) triples ((C,) after pooling).

        Raises InvalidInputError when consecutive layers do not compose or the
        globalavgpool/dense tail deviates from the conv->pool->dense pipeline.
        """
        h, w, cin = self.input_shape
        if cin != 3:
            raise InvalidInputError("input must have 3 channels")
        c = cin
        shapes = []
        gap_index = None
        dense_count = 0
        for idx, layer in enumerate(self.layers):
            if layer.kind == "conv2d":
                if gap_index is not None:
                    raise InvalidInputError("conv2d after globalavgpool")
                h = (h + 2 * layer.pad - layer.kernel) // layer.stride + 1
                w = (w + 2 * layer.pad - layer.kernel) // layer.stride + 1
                if h <= 0 or w <= 0:
                    raise InvalidInputError(f"layer {idx}: empty spatial output")
                c = layer.out_channels
                shapes.append((c, h, w))
            elif layer.kind == "batchnorm":
                if layer.channels != c:
                    raise InvalidInputError(
                        f"layer {idx}: batchnorm channels {layer.channels} != {c}"
                    )
                shapes.append((c, h, w))
            elif layer.kind == "relu":
                shapes.append((c, h, w) if gap_index is None else (c,))
            elif layer.kind == "maxpool":
                if layer.stride != layer.kernel:
                    raise InvalidInputError("maxpool requires stride == kernel")
                if h % layer.kernel or w % layer.kernel:
                    raise InvalidInputError(
                        f"layer {idx}: maxpool does not tile {h}x{w}"
                    )
                h //= layer.kernel
                w //= layer.kernel
                shapes.append((c, h, w))
            elif layer.kind == "globalavgpool":
                if gap_index is not None:
                    raise InvalidInputError("more than one globalavgpool")
                gap_index = idx
                shapes.append((c,))
            elif layer.kind == "dense":
                dense_count += 1
                if gap_index is None or idx != len(self.layers) - 1:
                    raise InvalidInputError("dense must be the final layer, after globalavgpool")
                if layer.in_features != c:
                    raise InvalidInputError(
                        f"dense in_features {layer.in_features} != feature width {c}"
                    )
                c = layer.out_features
                shapes.append((c,))
            else:  # pragma: no cover
                raise InvalidInputError(f"unknown layer kind {layer.kind!r}")
        if gap_index is None or dense_count != 1:
            raise InvalidInputError("model needs exactly one globalavgpool and one dense layer")
        prev = self.layers[gap_index - 1].kind if gap_index else None
        if prev not in ("conv2d", "batchnorm", "relu"):
            raise InvalidInputError("globalavgpool must follow the last conv block")
        if self.layers[-1].out_features != self.class_count:
            raise InvalidInputError("dense out_features must equal class_count")
        return shapes

    @property
    def last_conv_index(self):
        return max(i for i, l in enumerate(self.layers) if l.kind == "conv2d")

    @property
    def neuron_count(self):
        """Channel count of the last conv layer (the analysis 'neurons')."""
        return self.layers[self.last_conv_index].out_channels

    @property
    def feature_map_size(self):
        gap = next(i for i, l in enumerate(self.layers) if l.kind == "globalavgpool")
        shapes = self.infer_shapes()
        return shapes[gap - 1][1:]


def mininet(class_count=4, class_names=(), input_size=32):
    """Reference desk-scale architecture with 64 last-conv neurons."""
    return ModelSpec(
        layers=(
            Conv2d(16), BatchNorm(16), ReLU(), MaxPool(),
            Conv2d(32), BatchNorm(32), ReLU(), MaxPool(),
            Conv2d(64), BatchNorm(64), ReLU(),
            GlobalAvgPool(),
            Dense(64, class_count),
        ),
        input_shape=(input_size, input_size, 3),
        class_count=class_count,
        class_names=tuple(class_names),
    )


# ---------------------------------------------------------------------------
# parameters


def init_params(spec, seed=0, dtype=np.float32):
    """Seeded He-uniform init for conv/dense; BN gamma=1, beta=0."""
    rng = np.random.default_rng(seed)
    params = []
    c = 3
    for layer in spec.layers:
        if layer.kind == "conv2d":
            fan_in = c * layer.kernel * layer.kernel
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, (layer.out_channels, c, layer.kernel, layer.kernel))
            params.append({"w": w.astype(dtype), "b": np.zeros(layer.out_channels, dtype)})
            c = layer.out_channels
        elif layer.kind == "batchnorm":
            params.append({
                "gamma": np.ones(layer.channels, dtype),
                "beta": np.zeros(layer.channels, dtype),
                "running_mean": np.zeros(layer.channels, dtype),
                "running_var": np.ones(layer.channels, dtype),
            })
        elif layer.kind == "dense":
            bound = np.sqrt(6.0 / layer.in_features)
            w = rng.uniform(-bound, bound, (layer.out_features, layer.in_features))
            params.append({"w": w.astype(dtype), "b": np.zeros(layer.out_features, dtype)})
        else:
            params.append({})
    return params


PARAM_ORDER = {
    "conv2d": ("w", "b"),
    "batchnorm": ("gamma", "beta", "running_mean", "running_var"),
    "dense": ("w", "b"),
}


@dataclass
class Model:
    """A ModelSpec plus its parameter arrays. Treated as immutable after training."""

    spec: ModelSpec
    params: list

    @classmethod
    def create(cls, spec, seed=0, dtype=np.float32):
        return cls(spec, init_params(spec, seed, dtype))

    def copy(self):
        return Model(self.spec, [{k: v.copy() for k, v in p.items()} for p in self.params])

    def astype(self, dtype):
        return Model(self.spec, [{k: v.astype(dtype) for k, v in p.items()} for p in self.params])

    @property
    def dtype(self):
        return self.params[self.spec.last_conv_index]["w"].dtype

    @property
    def dense_weights(self):
        return self.params[-1]["w"]

    @property
    def dense_bias(self):
        return self.params[-1]["b"]


# ---------------------------------------------------------------------------
# forward / backward


def softmax(logits):
    """Row-wise softmax with 64-bit accumulation; output sums to 1."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    return p.astype(logits.dtype)


def log_softmax(logits):
    z = logits.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    ls = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    return ls.astype(logits.dtype)


def _maxpool_forward(x, k):
    n, c, h, w = x.shape
    win = x.reshape(n, c, h // k, k, w // k, k).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // k, w // k, k * k)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, idx


def _maxpool_backward(gy, idx, x_shape, k):
    n, c, h, w = x_shape
    gwin = np.zeros((n, c, h // k, w // k, k * k), dtype=gy.dtype)
    np.put_along_axis(gwin, idx[..., None], gy[..., None], axis=-1)
    gwin = gwin.reshape(n, c, h // k, w // k, k, k).transpose(0, 1, 2, 4, 3, 5)
    return gwin.reshape(n, c, h, w)


def _forward_layers(model, x, training=False):
    """Run all layers; returns (logits, caches, last_maps, pooled).

    ``caches`` holds whatever each layer's backward needs. ``last_maps`` is
    the input of the globalavgpool (post-ReLU feature maps of the last conv
    block) and ``pooled`` its output.
    """
    caches = []
    last_maps = None
    pooled = None
    for layer, p in zip(model.spec.layers, model.params):
        if layer.kind == "conv2d":
            caches.append(("conv2d", x, layer, p))
            x = kernels.conv2d_forward(x, p["w"], p["b"], layer.stride, layer.pad)
        elif layer.kind == "batchnorm":
            if training:
                mu = x.mean(axis=(0, 2, 3), dtype=np.float64)
                var = ((x.astype(np.float64) - mu[:, None, None]) ** 2).mean(axis=(0, 2, 3))
                mu = mu.astype(x.dtype)
                var = var.astype(x.dtype)
            else:
                mu, var = p["running_mean"], p["running_var"]
            inv_std = 1.0 / np.sqrt(var + layer.eps)
            xhat = (x - mu[:, None, None]) * inv_std[:, None, None]
            caches.append(("batchnorm", xhat, inv_std, layer, p, training, mu, var))
            x = p["gamma"][:, None, None] * xhat + p["beta"][:, None, None]
        elif layer.kind == "relu":
            mask = x > 0
            caches.append(("relu", mask))
            x = x * mask
        elif layer.kind == "maxpool":
            shape = x.shape
            x, idx = _maxpool_forward(x, layer.kernel)
            caches.append(("maxpool", idx, shape, layer.kernel))
        elif layer.kind == "globalavgpool":
            last_maps = x
            caches.append(("globalavgpool", x.shape))
            x = x.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)
            pooled = x
        elif layer.kind == "dense":
            caches.append(("dense", x, p))
            x = x @ p["w"].T + p["b"]
    return x, caches, last_maps, pooled


def _backward_layers(caches, gy, want_param_grads=False):
    """Backprop ``gy`` (d loss / d logits) through cached layers.

    Returns (gx, param_grads) where param_grads is a list aligned with the
    layers (None entries for parameterless layers) when requested.
    """
    grads = []
    for cache in reversed(caches):
        kind = cache[0]
        pgrad = None
        if kind == "conv2d":
            _, x, layer, p = cache
            gy, gw, gb = kernels.conv2d_backward(x, p["w"], layer.stride, layer.pad, gy)
            pgrad = {"w": gw, "b": gb}
        elif kind == "batchnorm":
            _, xhat, inv_std, layer, p, training, mu, var = cache
            ggamma = (gy * xhat).sum(axis=(0, 2, 3), dtype=np.float64).astype(gy.dtype)
            gbeta = gy.sum(axis=(0, 2, 3), dtype=np.float64).astype(gy.dtype)
            gxhat = gy * p["gamma"][:, None, None]
            if training:
                m = gy.shape[0] * gy.shape[2] * gy.shape[3]
                mean_g = gxhat.mean(axis=(0, 2, 3), dtype=np.float64).astype(gy.dtype)
                mean_gx = (gxhat * xhat).mean(axis=(0, 2, 3), dtype=np.float64).astype(gy.dtype)
                gy = inv_std[:, None, None] * (
                    gxhat - mean_g[:, None, None] - xhat * mean_gx[:, None, None]
                )
            else:
                gy = gxhat * inv_std[:, None, None]
            pgrad = {"gamma": ggamma, "beta": gbeta}
        elif kind == "relu":
            gy = gy * cache[1]
        elif kind == "maxpool":
            _, idx, shape, k = cache
            gy = _maxpool_backward(gy, idx, shape, k)
        elif kind == "globalavgpool":
            _, shape = cache
            n, c, h, w = shape
            gy = np.broadcast_to((gy / (h * w))[:, :, None, None], shape).astype(gy.dtype)
        elif kind == "dense":
            _, x, p = cache
            gw = gy.T @ x
            gb = gy.sum(axis=0)
            pgrad = {"w": gw, "b": gb}
            gy = gy @ p["w"]
        grads.append(pgrad)
    grads.reverse()
    return gy, (grads if want_param_grads else None)


# ---------------------------------------------------------------------------
# public inference API


@dataclass
class ForwardTrace:
    """Record of one inference: last-conv maps, pooled vector, outputs."""

    last_conv_maps: np.ndarray  # (n, hf, wf)
    pooled: np.ndarray  # (n,)
    logits: np.ndarray  # (c,)
    probabilities: np.ndarray  # (c,)
    predicted_label: int


@dataclass
class BatchOutputs:
    pooled: np.ndarray  # (N, n)
    logits: np.ndarray  # (N, c)
    probabilities: np.ndarray  # (N, c)
    predicted_labels: np.ndarray  # (N,)
    last_conv_maps: np.ndarray | None = None


def _check_images(model, images):
    h, w, c = model.spec.input_shape
    if images.shape[-3:] != (h, w, c):
        raise InvalidInputError(
            f"image shape {images.shape[-3:]} does not match model input {(h, w, c)}"
        )
    if not np.isfinite(images).all():
        raise InvalidInputError("image contains non-finite values")


def _to_nchw(model, images):
    _check_images(model, images)
    x = np.asarray(images, dtype=model.dtype)
    if x.ndim == 3:
        x = x[None]
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


def forward_batch(model, images, keep_maps=False):
    """Inference-mode forward over (N, H, W, 3) images."""
    x = _to_nchw(model, images)
    logits, _, maps, pooled = _forward_layers(model, x, training=False)
    probs = softmax(logits)
    return BatchOutputs(
        pooled=pooled,
        logits=logits,
        probabilities=probs,
        predicted_labels=probs.argmax(axis=1),
        last_conv_maps=maps if keep_maps else None,
    )


def forward(model, image):
    """Single-image inference returning a full ForwardTrace."""
    out = forward_batch(model, np.asarray(image), keep_maps=True)
    return ForwardTrace(
        last_conv_maps=out.last_conv_maps[0],
        pooled=out.pooled[0],
        logits=out.logits[0],
        probabilities=out.probabilities[0],
        predicted_label=int(out.predicted_labels[0]),
    )


def input_gradient_batch(model, images, labels):
    """Per-image gradient of cross-entropy w.r.t. the input pixels (HWC)."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= model.spec.class_count:
        raise InvalidInputError("label out of range")
    x = _to_nchw(model, images)
    logits, caches, _, _ = _forward_layers(model, x, training=False)
    p = softmax(logits).astype(x.dtype)
    p[np.arange(len(labels)), labels] -= 1.0
    gx, _ = _backward_layers(caches, p)
    return gx.transpose(0, 2, 3, 1)


def input_gradient(model, image, true_label):
    """d CrossEntropy(f(image), true_label) / d image, same (H, W, 3) shape."""
    return input_gradient_batch(model, np.asarray(image), [int(true_label)])[0]


def cross_entropy_and_grads(model, images_nchw, labels, training=True):
    """Mean cross-entropy over the batch plus parameter gradients."""
    logits, caches, _, _ = _forward_layers(model, images_nchw, training=training)
    ls = log_softmax(logits)
    n = len(labels)
    loss = -ls[np.arange(n), labels].mean(dtype=np.float64)
    dlogits = softmax(logits).astype(images_nchw.dtype)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    gx, pgrads = _backward_layers(caches, dlogits, want_param_grads=True)
    return float(loss), pgrads, gx, caches
