"""Region-substitution vulnerability maps, binarization, IoU, disk format."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advscope.errors import FormatError, InvalidInputError
from advscope.nn.model import forward
from advscope.vulnmap import (
    VulnerabilityMap,
    binarize_top_q,
    cache_filename,
    iou,
    load_map,
    rank_neurons_by_iou,
    save_map,
    vulnerability_maps,
    vulnerability_score,
)


@pytest.fixture(scope="module")
def vmap(workspace):
    return vulnerability_maps(workspace.model, workspace.pairs[0], k=2, s=4)


def test_identical_images_give_zero_maps(workspace):
    pair = dataclasses.replace(
        workspace.pairs[0], adversarial=workspace.pairs[0].benign.copy()
    )
    m = vulnerability_maps(workspace.model, pair, k=2, s=4)
    np.testing.assert_array_equal(m.b_map, 0.0)
    np.testing.assert_array_equal(m.a_map, 0.0)


def test_full_image_substitution_matches_direct_delta(workspace):
    # a window covering the whole image reproduces f(adv) - f(benign)
    pair = workspace.pairs[0]
    m = vulnerability_maps(workspace.model, pair, k=32, s=32)
    assert m.b_map.shape == (1, 1)
    t_b = forward(workspace.model, pair.benign)
    t_a = forward(workspace.model, pair.adversarial)
    delta = t_a.probabilities - t_b.probabilities
    assert abs(m.b_map[0, 0] - delta[pair.y]) < 1e-6
    assert abs(m.a_map[0, 0] - (-delta[pair.adv_label])) < 1e-6


def test_stride_consistency(workspace):
    pair = workspace.pairs[0]
    fine = vulnerability_maps(workspace.model, pair, k=2, s=1)
    coarse = vulnerability_maps(workspace.model, pair, k=2, s=2)
    np.testing.assert_array_equal(coarse.b_map, fine.b_map[::2, ::2])
    np.testing.assert_array_equal(coarse.a_map, fine.a_map[::2, ::2])


def test_logit_space(workspace):
    pair = workspace.pairs[0]
    m = vulnerability_maps(workspace.model, pair, k=32, s=32, value_space="logit")
    t_b = forward(workspace.model, pair.benign)
    t_a = forward(workspace.model, pair.adversarial)
    assert abs(m.b_map[0, 0] - (t_a.logits[pair.y] - t_b.logits[pair.y])) < 1e-4


def test_validation(workspace):
    pair = workspace.pairs[0]
    with pytest.raises(InvalidInputError):
        vulnerability_maps(workspace.model, pair, k=0)
    with pytest.raises(InvalidInputError):
        vulnerability_maps(workspace.model, pair, s=0)
    with pytest.raises(InvalidInputError):
        vulnerability_maps(workspace.model, pair, value_space="delta")


def test_score_nonnegative_and_upsampled(vmap):
    score = vulnerability_score(vmap, "benign")
    assert score.shape == vmap.image_shape
    assert (score >= 0).all()
    # each full-resolution cell equals its nearest lattice cell's value
    grid = np.maximum(-vmap.b_map, 0)
    assert score[0, 0] == grid[0, 0]


def test_binarize_exact_count(rng):
    score = rng.uniform(size=(32, 32))
    for q in (0.05, 0.2, 0.5, 1.0):
        mask = binarize_top_q(score, q)
        assert mask.sum() == int(round(q * score.size))
    with pytest.raises(InvalidInputError):
        binarize_top_q(score, 0.0)


def test_binarize_selects_highest(rng):
    score = rng.uniform(size=(8, 8))
    mask = binarize_top_q(score, 0.25)
    selected = score[mask == 1]
    rejected = score[mask == 0]
    assert selected.min() >= rejected.max()


def test_binarize_row_major_tie_break():
    score = np.zeros((2, 2))
    mask = binarize_top_q(score, 0.5)
    np.testing.assert_array_equal(mask, [[1, 1], [0, 0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_iou_properties(seed):
    r = np.random.default_rng(seed)
    a = (r.uniform(size=(6, 6)) > 0.5).astype(np.uint8)
    b = (r.uniform(size=(6, 6)) > 0.5).astype(np.uint8)
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    if a.any():
        assert iou(a, a) == 1.0


def test_iou_empty_and_mismatch():
    z = np.zeros((4, 4), np.uint8)
    assert iou(z, z) == 0.0
    with pytest.raises(InvalidInputError):
        iou(z, np.zeros((3, 3), np.uint8))


def test_rank_neurons_by_iou(workspace, vmap):
    pair = workspace.pairs[0]
    ranked = rank_neurons_by_iou(workspace.model, pair, vmap, "benign")
    ids = [n for n, _ in ranked]
    scores = [s for _, s in ranked]
    assert sorted(ids) == list(range(64))
    assert scores == sorted(scores, reverse=True)
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_map_disk_roundtrip(tmp_path, vmap):
    path = tmp_path / cache_filename(0, vmap.k, vmap.s, vmap.value_space)
    save_map(vmap, path)
    loaded = load_map(path)
    np.testing.assert_array_equal(loaded.b_map, vmap.b_map)
    np.testing.assert_array_equal(loaded.a_map, vmap.a_map)
    assert (loaded.k, loaded.s, loaded.value_space) == (vmap.k, vmap.s, vmap.value_space)
    assert loaded.image_shape == vmap.image_shape


def test_map_rejects_corruption(tmp_path, vmap):
    path = tmp_path / "m.bin"
    save_map(vmap, path)
    raw = path.read_bytes()
    path.write_bytes(b"XXXXXX" + raw[6:])
    with pytest.raises(FormatError):
        load_map(path)
    path.write_bytes(raw[:-4])
    with pytest.raises(FormatError):
        load_map(path)
