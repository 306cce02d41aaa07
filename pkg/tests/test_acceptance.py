"""End-to-end acceptance gate.

Each test covers one headline guarantee; the ``criterion`` marker makes the
run emit a single PASS/FAIL line per guarantee in the terminal summary (see
conftest). The pipeline test shells out to the CLI and is the slow one
(several minutes).
"""

import dataclasses
import subprocess
import sys
import time

import numpy as np
import pytest
from test_cluster import naive_agglomerate, random_distance_matrix

import gradcheck
from advscope.attack import AttackConfig, attack_dataset
from advscope.cluster import LINKAGES, agglomerate
from advscope.data import load_dataset
from advscope.measures import band_gap, contribution
from advscope.nn.io import load_model
from advscope.nn.model import ForwardTrace, forward, forward_batch
from advscope.nn.train import accuracy
from advscope.rf import receptive_field
from advscope.vulnmap import binarize_top_q, iou, vulnerability_maps


@pytest.mark.criterion("gradient correctness (20 instances, rel err < 1e-4, < 60 s)")
def test_gradient_correctness():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        worst = max(worst, gradcheck.check_param_gradients(seed))
        worst = max(worst, gradcheck.check_input_gradients(seed))
    elapsed = time.perf_counter() - start
    assert worst < 1e-4, f"worst relative error {worst:.3e}"
    assert elapsed < 60, f"gradient check took {elapsed:.1f} s"


@pytest.mark.criterion("attack contract (budget, range, flip; success >= 50%, "
           "monotone in eps)")
def test_attack_contract(model, dataset, split, pairs, attack_config):
    for p in pairs:
        delta = p.adversarial.astype(np.float64) - p.benign.astype(np.float64)
        assert np.abs(delta).max() <= attack_config.eps + 1e-6
        assert p.adversarial.min() >= 0 and p.adversarial.max() <= 1
        assert p.y != p.adv_label
    _, test_idx = split
    images, labels = dataset.images[test_idx], dataset.labels[test_idx]
    predicted = forward_batch(model, images).probabilities.argmax(axis=1)
    correct = int((predicted == labels).sum())
    assert correct > 0
    success = len(pairs) / correct
    assert success >= 0.5, f"success rate {success:.2f}"
    wide = dataclasses.replace(attack_config, eps=16 / 255)
    pairs_wide = attack_dataset(model, images, labels, wide)
    assert len(pairs_wide) >= len(pairs)


@pytest.mark.criterion("vulnerability-map oracles (zero map, full substitution, "
           "stride consistency, < 10 s)")
def test_vulnmap_oracles(model, workspace, rich_pair):
    pair = rich_pair
    # (a) no perturbation means identically zero maps
    same = dataclasses.replace(pair, adversarial=pair.benign.copy())
    vmap = vulnerability_maps(model, same, k=4, s=8)
    assert not vmap.b_map.any() and not vmap.a_map.any()
    # (b) one full-image cell reproduces the plain forward deltas
    full = vulnerability_maps(model, pair, k=32, s=32)
    out_b = forward(model, pair.benign).probabilities
    out_a = forward(model, pair.adversarial).probabilities
    assert abs(full.b_map[0, 0] - (out_a[pair.y] - out_b[pair.y])) < 1e-6
    assert abs(full.a_map[0, 0]
               - (out_b[pair.adv_label] - out_a[pair.adv_label])) < 1e-6
    # (c) + (d) dense map under budget; coarse map is its sublattice
    start = time.perf_counter()
    dense = vulnerability_maps(model, pair, k=2, s=1)
    elapsed = time.perf_counter() - start
    assert elapsed < 10, f"dense map took {elapsed:.1f} s"
    coarse = vulnerability_maps(model, pair, k=2, s=2)
    np.testing.assert_array_equal(coarse.b_map, dense.b_map[::2, ::2])
    np.testing.assert_array_equal(coarse.a_map, dense.a_map[::2, ::2])


@pytest.mark.criterion("band-gap formula (sign fixtures, antisymmetry x10000, "
           "logit decomposition)")
def test_band_gap_and_decomposition(workspace):
    assert band_gap(([0.0], [1.0]), ([2.0], [3.0]))[0] == -1.0
    assert band_gap(([2.0], [3.0]), ([0.0], [1.0]))[0] == 1.0
    assert band_gap(([0.0], [2.0]), ([1.0], [3.0]))[0] == 0.0
    rng = np.random.default_rng(5)
    n = 10_000
    lo_a = rng.normal(size=n)
    a = (lo_a, lo_a + rng.uniform(0.01, 1.0, n))
    # place b strictly above or below a so the bands never overlap
    offset = rng.uniform(0.01, 1.0, n) * rng.choice([-1.0, 1.0], n)
    lo_b = np.where(offset > 0, a[1] + offset, lo_a + offset - 1.0)
    b = (lo_b, np.where(offset > 0, lo_b + 0.5, lo_a - 0.001))
    assert ((a[1] < b[0]) | (b[1] < a[0])).all()
    np.testing.assert_allclose(band_gap(a, b), -band_gap(b, a), atol=1e-12)
    for pair in workspace.pairs:
        for image in (pair.benign, pair.adversarial):
            trace = forward(workspace.model, image)
            for class_id in range(len(workspace.class_names)):
                v = contribution(workspace.model, trace, class_id)
                total = v.values.sum() + workspace.model.dense_bias[class_id]
                assert abs(total - trace.logits[class_id]) < 1e-5


@pytest.mark.criterion("IoU and RF properties (10000 mask pairs, 1000 traces, "
           "exact top-q fraction)")
def test_iou_and_rf_properties(model):
    rng = np.random.default_rng(9)
    for _ in range(10_000):
        density = rng.uniform(0, 1, 2)
        a = rng.random((8, 8)) < density[0]
        b = rng.random((8, 8)) < density[1]
        ab = iou(a, b)
        assert ab == iou(b, a)
        assert 0.0 <= ab <= 1.0
        assert iou(a, a) == (1.0 if a.any() else 0.0)
    images = rng.uniform(0, 1, (1000, 32, 32, 3)).astype(np.float32)
    out = forward_batch(model, images, keep_maps=True)
    neurons = rng.integers(0, out.last_conv_maps.shape[1], 1000)
    for i in range(1000):
        trace = ForwardTrace(out.last_conv_maps[i], out.pooled[i],
                             out.logits[i], out.probabilities[i],
                             int(out.probabilities[i].argmax()))
        previous = None
        for t in (0.2, 0.5, 0.8):
            mask = receptive_field(trace, int(neurons[i]), images[i],
                                   threshold=t).mask
            if previous is not None:
                assert (mask <= previous).all()
            previous = mask
    for q in (0.05, 0.2, 0.5, 0.77, 1.0):
        score = rng.random((32, 32))
        mask = binarize_top_q(score, q)
        assert abs(mask.mean() - q) <= 1.0 / score.size


@pytest.mark.criterion("clustering equivalence (100 matrices x 3 linkages vs naive "
           "oracle, 1e-9)")
def test_clustering_equivalence():
    rng = np.random.default_rng(3)
    for trial in range(100):
        d = random_distance_matrix(rng, 32)
        for linkage in LINKAGES:
            dendro = agglomerate(d, linkage)
            want = naive_agglomerate(d, linkage)
            for m, (node, i, j, height, count) in zip(dendro.merges, want):
                assert (m.node, m.count) == (node, count)
                assert {m.left, m.right} == {i, j}
                assert abs(m.height - height) < 1e-9
            assert dendro.root == 62
            assert sorted(dendro.leaf_order()) == list(range(32))
            for m in dendro.merges:
                left = set(dendro.leaves_under(m.left))
                right = set(dendro.leaves_under(m.right))
                assert not left & right
                assert left | right == set(dendro.leaves_under(m.node))


def _cli(workdir, *args):
    result = subprocess.run(
        [sys.executable, "-m", "advscope.cli", "--workdir", str(workdir),
         *args],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    return result.stdout


@pytest.mark.criterion("pipeline reproducibility (bitwise-identical reruns, < 10 min, "
           "test acc >= 0.90)")
def test_pipeline_reproducibility(tmp_path):
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    start = time.perf_counter()
    _cli(dir_a, "gen-data", "--per-class", "500")
    _cli(dir_a, "train", "--epochs", "10")
    _cli(dir_a, "attack")
    _cli(dir_a, "precompute")
    elapsed = time.perf_counter() - start
    assert elapsed < 600, f"pipeline took {elapsed:.0f} s"
    dataset, _, test_idx = load_dataset(dir_a / "shapes.npz")
    model = load_model(dir_a / "model.mnet")
    acc = accuracy(model, dataset.images[test_idx], dataset.labels[test_idx])
    assert acc >= 0.90, f"test accuracy {acc:.4f}"

    _cli(dir_b, "gen-data", "--per-class", "500")
    _cli(dir_b, "train", "--epochs", "10")
    _cli(dir_b, "attack")
    manifest_a = (dir_a / "run" / "manifest.json").read_bytes()
    assert manifest_a == (dir_b / "run" / "manifest.json").read_bytes()
    assert (dir_a / "run" / "images.bin").read_bytes() == \
        (dir_b / "run" / "images.bin").read_bytes()

    import json

    pair_ids = [str(p["id"]) for p in
                json.loads(manifest_a)["pairs"][:5]]
    assert pair_ids, "pipeline run produced no pairs"
    _cli(dir_b, "precompute", "--pairs", ",".join(pair_ids))
    for name in sorted(f.name for f in (dir_b / "run" / "cache").iterdir()):
        assert (dir_a / "run" / "cache" / name).read_bytes() == \
            (dir_b / "run" / "cache" / name).read_bytes(), name


@pytest.mark.criterion("API contract (schemas, matrix total, ranking permutations, "
           "cache bitwise)")
def test_api_contract(workspace, rich_pair):
    from fastapi.testclient import TestClient

    from advscope.server.app import create_app

    client = TestClient(create_app(workspace))
    pid = rich_pair.id

    def body(url):
        response = client.get(url)
        assert response.status_code == 200, f"{url}: {response.text}"
        assert response.headers["content-type"].startswith("application/json")
        return response.json()

    matrix = body("/matrix")
    assert matrix["total"] == len(workspace.pairs)
    assert np.array(matrix["counts"]).sum() == len(workspace.pairs)

    overview = body("/overview?method=pca")
    assert len(overview["points"]) == len(workspace.pairs)
    assert all({"id", "y", "adv_label", "benign", "adversarial"}
               == set(p) for p in overview["points"])

    cell = body(f"/cell/{rich_pair.y}/{rich_pair.adv_label}/pairs?sort=l2_asc")
    assert all(e["y"] == rich_pair.y for e in cell["pairs"])

    for sort in ("gap", "iou_b", "iou_a"):
        neurons = body(f"/pair/{pid}/neurons?sort={sort}&s=4")["neurons"]
        assert sorted(n["id"] for n in neurons) == list(range(64))
        keys = [n["sort_value"] for n in neurons]
        assert keys == sorted(keys, reverse=True)

    rf = body(f"/pair/{pid}/neuron/3/rf?side=benign")
    assert {"mask", "image", "dead"} <= set(rf)
    assert body(f"/pair/{pid}/neuron/3/context?m=2")["items"]
    vm = body(f"/pair/{pid}/vulnmap?s=4")
    assert np.array(vm["score"]).shape == tuple(rich_pair.benign.shape[:2])
    dendro = body(f"/pair/{pid}/dendrogram")["dendrogram"]
    assert dendro["leaf_count"] == 64 and len(dendro["merges"]) == 63
    assert body(f"/pair/{pid}/cluster-rf?nodes={dendro['merges'][-1]['node']}"
                )["leaves"] == list(range(64))
    assert body("/cache/stats")["entries"] >= 1

    url = f"/pair/{pid}/vulnmap?s=4"
    cached = client.get(url).content
    assert cached == client.get(url).content
    assert cached == client.get(url + "&recompute=1").content
