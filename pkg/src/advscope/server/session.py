"""Session-level artifact computation and caching for a loaded run.

Everything here is deterministic for a fixed run and parameter set; the
disk caches under ``<run>/cache`` are shared with the CLI precompute step.
"""

import base64
import io
import json
import threading
from pathlib import Path

import numpy as np
from PIL import Image

from .. import cluster as cluster_mod
from .. import measures, rf, vulnmap
from ..nn.model import forward


def dump_json(obj):
    """Canonical JSON bytes: sorted keys, fixed separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def png_bytes(image):
    """Encode an (H, W, 3) float image in [0, 1] as 8-bit PNG bytes."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    buf = io.BytesIO()
    Image.fromarray((arr * 255.0).round().astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def png_b64(image):
    return base64.b64encode(png_bytes(image)).decode("ascii")


def heatmap_overlay(image, score):
    """Blend a red heatmap (score-proportional) over an image."""
    score = np.asarray(score, dtype=np.float64)
    peak = score.max()
    alpha = (score / peak if peak > 0 else score)[:, :, None] * 0.7
    red = np.zeros(image.shape)
    red[:, :, 0] = 1.0
    return image * (1 - alpha) + red * alpha


class Session:
    """Per-run artifact store with thread-safe memoization."""

    def __init__(self, workspace, cache_dir=None):
        self.workspace = workspace
        if cache_dir is None and workspace.run_dir is not None:
            cache_dir = workspace.run_dir / "cache"
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._traces = {}
        self._vmaps = {}
        self._dendros = {}
        self._bands = {}
        self.disk_hits = 0
        self.disk_misses = 0

    # -- traces -------------------------------------------------------------

    def trace(self, pair_id, side):
        key = (pair_id, side)
        with self._lock:
            if key in self._traces:
                return self._traces[key]
        pair = self.workspace.pair(pair_id)
        image = pair.benign if side == "benign" else pair.adversarial
        t = forward(self.workspace.model, image)
        with self._lock:
            self._traces[key] = t
        return t

    # -- vulnerability maps ---------------------------------------------------

    def vulnerability_map(self, pair_id, k, s, value_space="probability"):
        key = (pair_id, k, s, value_space)
        with self._lock:
            if key in self._vmaps:
                return self._vmaps[key]
        path = (
            self.cache_dir / vulnmap.cache_filename(pair_id, k, s, value_space)
            if self.cache_dir
            else None
        )
        vmap = None
        if path and path.exists():
            vmap = vulnmap.load_map(path)
            self.disk_hits += 1
        if vmap is None:
            pair = self.workspace.pair(pair_id)
            vmap = vulnmap.vulnerability_maps(
                self.workspace.model, pair, k=k, s=s, value_space=value_space
            )
            self.disk_misses += 1
            if path:
                vulnmap.save_map(vmap, path)
        with self._lock:
            self._vmaps[key] = vmap
        return vmap

    # -- dendrograms -----------------------------------------------------------

    def dendrogram_json(self, pair_id, threshold=0.5, linkage="average"):
        key = (pair_id, threshold, linkage)
        with self._lock:
            if key in self._dendros:
                return self._dendros[key]
        path = (
            self.cache_dir / f"dendro_{pair_id}_{threshold}_{linkage}.json"
            if self.cache_dir
            else None
        )
        if path and path.exists():
            payload = json.loads(path.read_text("utf-8"))
            self.disk_hits += 1
        else:
            pair = self.workspace.pair(pair_id)
            rf_b, rf_a = cluster_mod.pair_rf_images(
                self.workspace.model, pair, threshold=threshold
            )
            dist = cluster_mod.neuron_distance_matrix(rf_b, rf_a)
            payload = cluster_mod.agglomerate(dist, linkage).to_json()
            self.disk_misses += 1
            if path:
                path.write_bytes(dump_json(payload))
        with self._lock:
            self._dendros[key] = payload
        return payload

    def dendrogram(self, pair_id, threshold=0.5, linkage="average"):
        payload = self.dendrogram_json(pair_id, threshold, linkage)
        merges = [
            cluster_mod.Merge(m["node"], m["left"], m["right"], m["height"], m["count"])
            for m in payload["merges"]
        ]
        return cluster_mod.Dendrogram(payload["leaf_count"], merges)

    # -- class bands -------------------------------------------------------------

    def band(self, class_id, role, confidence=measures.DEFAULT_CONFIDENCE):
        key = (class_id, role, confidence)
        with self._lock:
            if key in self._bands:
                return self._bands[key]
        b = measures.class_band(
            self.workspace.model, self.workspace.pairs, role, class_id, confidence
        )
        with self._lock:
            self._bands[key] = b
        return b

    # -- composite payloads ----------------------------------------------------

    def neuron_payload(self, pair_id, sort="gap", k=vulnmap.DEFAULT_REGION,
                       s=vulnmap.DEFAULT_STRIDE, threshold=0.5,
                       q=vulnmap.DEFAULT_TOP_FRACTION,
                       confidence=measures.DEFAULT_CONFIDENCE):
        """Ranked neuron entries with curves, bands and the sort measure."""
        ws = self.workspace
        pair = ws.pair(pair_id)
        trace_b = self.trace(pair_id, "benign")
        trace_a = self.trace(pair_id, "adversarial")
        curve_b = measures.contribution(ws.model, trace_b, pair.y).values
        curve_a = measures.contribution(ws.model, trace_a, pair.adv_label).values
        band_b = self.band(pair.y, "benign", confidence)
        band_a = self.band(pair.adv_label, "adversarial", confidence)
        gaps = measures.band_gap(
            (band_a.lower, band_a.upper), (band_b.lower, band_b.upper)
        )
        n = len(gaps)
        if sort == "gap":
            order = sorted(range(n), key=lambda i: (-gaps[i], i))
            sort_values = gaps
        elif sort in ("iou_b", "iou_a"):
            vmap = self.vulnerability_map(pair_id, k, s)
            which = "benign" if sort == "iou_b" else "adversarial"
            ranked = vulnmap.rank_neurons_by_iou(
                ws.model, pair, vmap, which, threshold=threshold, q=q, trace=trace_b
            )
            order = [neuron for neuron, _ in ranked]
            sort_values = np.zeros(n)
            for neuron, value in ranked:
                sort_values[neuron] = value
        else:
            from ..errors import InvalidInputError

            raise InvalidInputError("sort must be one of gap, iou_b, iou_a")
        neurons = [
            {
                "id": int(i),
                "curve_b": float(curve_b[i]),
                "curve_a": float(curve_a[i]),
                "band_b": [float(band_b.lower[i]), float(band_b.upper[i])],
                "band_a": [float(band_a.lower[i]), float(band_a.upper[i])],
                "bg": float(gaps[i]),
                "sort_value": float(sort_values[i]),
            }
            for i in order
        ]
        return neurons
