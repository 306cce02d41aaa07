"""Model file serialization.

Layout: magic b"MNET1\\0", little-endian uint32 header length, UTF-8 JSON
header (layer descriptors, input shape, class names, blob byte length), then
the raw little-endian float32 parameters concatenated in layer declaration
order (conv: weights OIHW then bias; batchnorm: gamma, beta, running mean,
running var; dense: row-major weights then bias).
"""

import json
import struct

import numpy as np

from ..errors import FormatError
from .model import _LAYER_TYPES, Model, ModelSpec, PARAM_ORDER

MAGIC = b"MNET1\x00"


def _layer_to_json(layer):
    d = {"kind": layer.kind}
    for name in layer.__dataclass_fields__:
        if name != "kind":
            d[name] = getattr(layer, name)
    return d


def _layer_from_json(d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _LAYER_TYPES:
        raise FormatError(f"unknown layer kind {kind!r}")
    try:
        return _LAYER_TYPES[kind](**d)
    except TypeError as exc:
        raise FormatError(f"bad {kind} descriptor: {exc}") from None


def save_model(model, path):
    chunks = []
    for layer, p in zip(model.spec.layers, model.params):
        for key in PARAM_ORDER.get(layer.kind, ()):
            chunks.append(np.ascontiguousarray(p[key], dtype="<f4").tobytes())
    blob = b"".join(chunks)
    header = json.dumps(
        {
            "layers": [_layer_to_json(l) for l in model.spec.layers],
            "input_shape": list(model.spec.input_shape),
            "class_count": model.spec.class_count,
            "class_names": list(model.spec.class_names),
            "blob_len": len(blob),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(blob)


def load_model(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic bytes")
    if len(raw) < len(MAGIC) + 4:
        raise FormatError("truncated header")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if len(raw) < header_end:
        raise FormatError("truncated header")
    try:
        header = json.loads(raw[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from None
    blob = raw[header_end:]
    if len(blob) != header.get("blob_len"):
        raise FormatError(
            f"blob length {len(blob)} does not match declared {header.get('blob_len')}"
        )
    try:
        spec = ModelSpec(
            layers=tuple(_layer_from_json(d) for d in header["layers"]),
            input_shape=tuple(header["input_shape"]),
            class_count=header["class_count"],
            class_names=tuple(header.get("class_names", ())),
        )
    except KeyError as exc:
        raise FormatError(f"header missing field {exc}") from None
    from .model import init_params

    params = init_params(spec, seed=0)  # shapes only; overwritten below
    offset = 0
    for layer, p in zip(spec.layers, params):
        for key in PARAM_ORDER.get(layer.kind, ()):
            size = p[key].size * 4
            if offset + size > len(blob):
                raise FormatError("blob shorter than parameter shapes require")
            arr = np.frombuffer(blob, dtype="<f4", count=p[key].size, offset=offset)
            p[key] = arr.reshape(p[key].shape).copy()
            offset += size
    if offset != len(blob):
        raise FormatError("blob longer than parameter shapes require")
    model = Model(spec, params)
    for p in params:
        for v in p.values():
            if not np.isfinite(v).all():
                raise FormatError("non-finite parameter values")
    return model
