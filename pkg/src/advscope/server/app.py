"""HTTP/JSON API over a loaded run.

All endpoints are GET, deterministic for a fixed run and parameters, and
cached (byte-budgeted LRU with single-flight). ``recompute=1`` bypasses the
cache read so clients and tests can compare cached against fresh bodies.
Responses echo the effective analysis parameters so views can label
themselves. See docs/api.md for the schema reference.
"""

import os
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import measures, vulnmap
from ..errors import InsufficientMembersError, InvalidInputError, NotFoundError
from ..rf import context_images, receptive_field, rle_encode
from ..workspace import SORT_MEASURES, build_prediction_matrix, project_pairs, sort_pairs
from .cache import ResponseCache
from .session import Session, dump_json, heatmap_overlay, png_b64, png_bytes


def _params(request, **spec):
    """Parse query params per ``spec`` {name: (type, default)}; 400 on junk."""
    out = {}
    for name, (typ, default) in spec.items():
        raw = request.query_params.get(name)
        if raw is None:
            out[name] = default
            continue
        try:
            out[name] = typ(raw)
        except ValueError:
            raise InvalidInputError(f"invalid value for parameter '{name}'") from None
    return out


def _choice(value, allowed, field):
    if value not in allowed:
        raise InvalidInputError(f"parameter '{field}' must be one of {sorted(allowed)}")
    return value


def create_app(workspace, cache_bytes=256 * 1024 * 1024, static_dir=None):
    app = FastAPI(title="advscope", docs_url=None, redoc_url=None)
    session = Session(workspace)
    cache = ResponseCache(cache_bytes)
    app.state.session = session
    app.state.cache = cache

    @app.exception_handler(NotFoundError)
    async def _not_found(request, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(InvalidInputError)
    async def _bad_request(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(InsufficientMembersError)
    async def _too_few(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def cached_json(request, build):
        force = request.query_params.get("recompute") == "1"
        items = [(k, v) for k, v in sorted(request.query_params.multi_items())
                 if k != "recompute"]
        key = request.url.path + "?" + "&".join(f"{k}={v}" for k, v in items)
        body = cache.get_or_compute(key, lambda: dump_json(build()), force=force)
        return Response(content=body, media_type="application/json")

    ws = workspace

    @app.get("/overview")
    def overview(request: Request):
        p = _params(request, color_by=(str, "true"), method=(str, "pca"), seed=(int, 0))
        _choice(p["color_by"], {"true", "predicted"}, "color_by")
        _choice(p["method"], {"pca", "tsne"}, "method")

        def build():
            proj = project_pairs(ws, method=p["method"], seed=p["seed"])
            return {
                "method": proj.method,
                "seed": proj.seed,
                "color_by": p["color_by"],
                "class_names": list(ws.class_names),
                "points": [
                    {
                        "id": pair.id,
                        "y": pair.y,
                        "adv_label": pair.adv_label,
                        "benign": [float(v) for v in proj.benign[i]],
                        "adversarial": [float(v) for v in proj.adversarial[i]],
                    }
                    for i, pair in enumerate(ws.pairs)
                ],
            }

        return cached_json(request, build)

    @app.get("/matrix")
    def matrix(request: Request):
        def build():
            counts = build_prediction_matrix(ws.pairs, len(ws.class_names))
            return {
                "class_names": list(ws.class_names),
                "counts": counts.tolist(),
                "total": int(counts.sum()),
            }

        return cached_json(request, build)

    @app.get("/cell/{true_label}/{adv_label}/pairs")
    def cell_pairs(true_label: int, adv_label: int, request: Request):
        p = _params(request, sort=(str, "l2_asc"), thumbnails=(int, 1))
        _choice(p["sort"], set(SORT_MEASURES), "sort")
        c = len(ws.class_names)
        if not (0 <= true_label < c and 0 <= adv_label < c):
            raise NotFoundError(f"no such cell ({true_label}, {adv_label})")

        def build():
            subset = [q for q in ws.pairs if q.y == true_label and q.adv_label == adv_label]
            order = sort_pairs(subset, p["sort"])
            by_id = {q.id: q for q in subset}
            entries = []
            for pid in order:
                pair = by_id[pid]
                entry = {
                    "id": pair.id,
                    "y": pair.y,
                    "adv_label": pair.adv_label,
                    "p_benign": [float(v) for v in pair.p_benign],
                    "p_adv": [float(v) for v in pair.p_adv],
                    "l2": pair.l2,
                }
                if p["thumbnails"]:
                    entry["thumb_benign"] = png_b64(pair.benign)
                    entry["thumb_adv"] = png_b64(pair.adversarial)
                entries.append(entry)
            return {"sort": p["sort"], "pairs": entries}

        return cached_json(request, build)

    @app.get("/pair/{pair_id}/image")
    def pair_image(pair_id: int, request: Request):
        p = _params(request, side=(str, "benign"))
        _choice(p["side"], {"benign", "adversarial"}, "side")
        pair = ws.pair(pair_id)
        image = pair.benign if p["side"] == "benign" else pair.adversarial
        return Response(content=png_bytes(image), media_type="image/png")

    @app.get("/pair/{pair_id}/neurons")
    def pair_neurons(pair_id: int, request: Request):
        p = _params(
            request, sort=(str, "gap"), k=(int, vulnmap.DEFAULT_REGION),
            s=(int, vulnmap.DEFAULT_STRIDE), t=(float, 0.5),
            q=(float, vulnmap.DEFAULT_TOP_FRACTION),
            gamma=(float, measures.DEFAULT_CONFIDENCE),
        )
        _choice(p["sort"], {"gap", "iou_b", "iou_a"}, "sort")
        ws.pair(pair_id)

        def build():
            neurons = session.neuron_payload(
                pair_id, sort=p["sort"], k=p["k"], s=p["s"],
                threshold=p["t"], q=p["q"], confidence=p["gamma"],
            )
            return {"params": p, "neurons": neurons}

        return cached_json(request, build)

    @app.get("/pair/{pair_id}/neuron/{neuron}/rf")
    def neuron_rf(pair_id: int, neuron: int, request: Request):
        p = _params(request, t=(float, 0.5), side=(str, "benign"))
        _choice(p["side"], {"benign", "adversarial"}, "side")
        pair = ws.pair(pair_id)
        n = ws.model.spec.neuron_count
        if not 0 <= neuron < n:
            raise NotFoundError(f"unknown neuron {neuron}")

        def build():
            trace = session.trace(pair_id, p["side"])
            image = pair.benign if p["side"] == "benign" else pair.adversarial
            field = receptive_field(trace, neuron, image, threshold=p["t"])
            return {
                "params": p,
                "neuron": neuron,
                "dead": field.dead,
                "mask": rle_encode(field.mask),
                "image": png_b64(field.image),
            }

        return cached_json(request, build)

    @app.get("/pair/{pair_id}/neuron/{neuron}/context")
    def neuron_context(pair_id: int, neuron: int, request: Request):
        p = _params(request, sort=(str, "activation"), m=(int, 6), t=(float, 0.5))
        _choice(p["sort"], {"activation", "confidence"}, "sort")
        if p["m"] < 1:
            raise InvalidInputError("parameter 'm' must be >= 1")
        pair = ws.pair(pair_id)
        n = ws.model.spec.neuron_count
        if not 0 <= neuron < n:
            raise NotFoundError(f"unknown neuron {neuron}")

        def build():
            subset = [
                q for q in ws.pairs if q.y == pair.y and q.adv_label == pair.adv_label
            ]
            items = context_images(
                ws.model, neuron, subset, sort=p["sort"], m=p["m"], threshold=p["t"]
            )
            return {
                "params": p,
                "neuron": neuron,
                "items": [
                    {
                        "pair_id": pid,
                        "benign_rf": png_b64(field_b.image),
                        "adversarial_rf": png_b64(field_a.image),
                    }
                    for pid, field_b, field_a in items
                ],
            }

        return cached_json(request, build)

    @app.get("/pair/{pair_id}/vulnmap")
    def pair_vulnmap(pair_id: int, request: Request):
        p = _params(
            request, which=(str, "benign"), k=(int, vulnmap.DEFAULT_REGION),
            s=(int, vulnmap.DEFAULT_STRIDE),
            q=(float, vulnmap.DEFAULT_TOP_FRACTION),
            space=(str, "probability"),
        )
        _choice(p["which"], {"benign", "adv"}, "which")
        _choice(p["space"], set(vulnmap.VALUE_SPACES), "space")
        ws.pair(pair_id)

        def build():
            vmap = session.vulnerability_map(pair_id, p["k"], p["s"], p["space"])
            which = "benign" if p["which"] == "benign" else "adversarial"
            score = vulnmap.vulnerability_score(vmap, which)
            binarized = vulnmap.binarize_top_q(score, p["q"])
            pair = ws.pair(pair_id)
            return {
                "params": p,
                "score": [[float(v) for v in row] for row in score],
                "binarized": rle_encode(binarized),
                "overlay": png_b64(heatmap_overlay(pair.benign, score)),
            }

        return cached_json(request, build)

    @app.get("/pair/{pair_id}/dendrogram")
    def pair_dendrogram(pair_id: int, request: Request):
        p = _params(request, t=(float, 0.5), linkage=(str, "average"))
        ws.pair(pair_id)

        def build():
            payload = session.dendrogram_json(pair_id, p["t"], p["linkage"])
            return {"params": p, "dendrogram": payload}

        return cached_json(request, build)

    @app.get("/pair/{pair_id}/cluster-rf")
    def pair_cluster_rf(pair_id: int, request: Request):
        p = _params(
            request, nodes=(str, ""), op=(str, "union"), side=(str, "benign"),
            t=(float, 0.5),
        )
        _choice(p["op"], {"union", "intersection"}, "op")
        _choice(p["side"], {"benign", "adversarial"}, "side")
        pair = ws.pair(pair_id)
        if not p["nodes"]:
            raise InvalidInputError("parameter 'nodes' is required")
        try:
            nodes = [int(v) for v in p["nodes"].split(",")]
        except ValueError:
            raise InvalidInputError("parameter 'nodes' must be comma-separated ints") from None

        def build():
            from ..cluster import cluster_rf, select_subtree

            dendro = session.dendrogram(pair_id, p["t"])
            leaves = select_subtree(dendro, nodes)
            mask, image = cluster_rf(
                ws.model, pair, leaves, op=p["op"], side=p["side"], threshold=p["t"]
            )
            return {
                "params": p,
                "leaves": leaves,
                "mask": rle_encode(mask),
                "image": png_b64(image),
            }

        return cached_json(request, build)

    @app.get("/cache/stats")
    def cache_stats():
        stats = cache.stats()
        stats["disk_hits"] = session.disk_hits
        stats["disk_misses"] = session.disk_misses
        return stats

    static_dir = static_dir or os.environ.get("ADVSCOPE_STATIC")
    if static_dir is None:
        candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        if candidate.is_dir():
            static_dir = candidate
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
