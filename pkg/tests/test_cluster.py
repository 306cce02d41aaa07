"""Agglomerative clustering against a naive oracle, dendrogram structure."""

import numpy as np
import pytest

from advscope.cluster import (
    LINKAGES,
    Dendrogram,
    agglomerate,
    cluster_rf,
    neuron_distance_matrix,
    pair_rf_images,
    select_subtree,
)
from advscope.errors import InvalidInputError, NotFoundError


def naive_agglomerate(dist, linkage):
    """O(n^3) oracle: recompute every cluster distance from the original
    matrix at every step instead of using running updates."""
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    clusters = {i: [i] for i in range(n)}
    merges = []
    for step in range(n - 1):
        best = None
        for i in sorted(clusters):
            for j in sorted(clusters):
                if j <= i:
                    continue
                block = d[np.ix_(clusters[i], clusters[j])]
                if linkage == "single":
                    dij = block.min()
                elif linkage == "complete":
                    dij = block.max()
                else:
                    dij = block.mean()
                key = (dij, i, j)
                if best is None or key < best:
                    best = key
        dij, i, j = best
        new_id = n + step
        clusters[new_id] = clusters.pop(i) + clusters.pop(j)
        merges.append((new_id, i, j, dij, len(clusters[new_id])))
    return merges


def random_distance_matrix(rng, n):
    pts = rng.standard_normal((n, 4))
    d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    return d


@pytest.mark.parametrize("linkage", LINKAGES)
def test_matches_naive_oracle(linkage, rng):
    for _ in range(10):
        d = random_distance_matrix(rng, 12)
        got = agglomerate(d, linkage)
        want = naive_agglomerate(d, linkage)
        for m, (node, i, j, height, count) in zip(got.merges, want):
            assert (m.node, m.count) == (node, count)
            assert {m.left, m.right} == {i, j}
            assert abs(m.height - height) < 1e-9


def test_tie_break_smallest_ids():
    # four equidistant points: first merge must be (0, 1)
    d = np.ones((4, 4)) - np.eye(4)
    dendro = agglomerate(d, "average")
    first = dendro.merges[0]
    assert (min(first.left, first.right), max(first.left, first.right)) == (0, 1)


def test_structural_invariants(rng):
    d = random_distance_matrix(rng, 20)
    dendro = agglomerate(d, "average")
    assert dendro.leaf_count == 20
    assert len(dendro.merges) == 19
    assert dendro.root == 38
    assert sorted(dendro.leaves_under(dendro.root)) == list(range(20))
    assert dendro.merges[-1].count == 20
    order = dendro.leaf_order()
    assert sorted(order) == list(range(20))
    # every internal node's leaf set is the disjoint union of its children's
    for m in dendro.merges:
        left = set(dendro.leaves_under(m.left))
        right = set(dendro.leaves_under(m.right))
        assert not left & right
        assert left | right == set(dendro.leaves_under(m.node))


def test_heights_monotone_for_average_of_metric(rng):
    # average linkage on a metric matrix yields nondecreasing merge heights
    d = random_distance_matrix(rng, 16)
    dendro = agglomerate(d, "average")
    heights = [m.height for m in dendro.merges]
    assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))


def test_matrix_validation():
    with pytest.raises(InvalidInputError):
        agglomerate(np.zeros((3, 2)), "average")
    bad = np.ones((3, 3))
    with pytest.raises(InvalidInputError):
        agglomerate(bad, "average")  # nonzero diagonal
    with pytest.raises(InvalidInputError):
        agglomerate(np.zeros((3, 3)), "ward")


def test_select_subtree(rng):
    d = random_distance_matrix(rng, 8)
    dendro = agglomerate(d, "complete")
    root_leaves = select_subtree(dendro, [dendro.root])
    assert root_leaves == list(range(8))
    assert select_subtree(dendro, [3]) == [3]
    with pytest.raises(NotFoundError):
        dendro.leaves_under(99)


def test_distance_matrix_properties(workspace):
    rf_b, rf_a = pair_rf_images(workspace.model, workspace.pairs[0])
    d = neuron_distance_matrix(rf_b, rf_a)
    assert d.shape == (64, 64)
    np.testing.assert_allclose(d, d.T, atol=1e-9)
    np.testing.assert_array_equal(np.diag(d), 0.0)
    # spot-check one entry against the definition
    i, j = 2, 11
    direct = np.sqrt(
        ((rf_b[i] - rf_b[j]) ** 2).sum() + ((rf_a[i] - rf_a[j]) ** 2).sum()
    )
    assert abs(d[i, j] - direct) < 1e-8


def test_cluster_rf_masks(workspace):
    pair = workspace.pairs[0]
    union_mask, union_img = cluster_rf(workspace.model, pair, [0, 1, 2], op="union")
    inter_mask, _ = cluster_rf(workspace.model, pair, [0, 1, 2], op="intersection")
    assert (inter_mask <= union_mask).all()
    assert union_img.shape == (32, 32, 3)
    np.testing.assert_array_equal(union_img[union_mask == 0], 0.0)
    with pytest.raises(InvalidInputError):
        cluster_rf(workspace.model, pair, [], op="union")


def test_dendrogram_json_roundtrip(rng):
    d = random_distance_matrix(rng, 10)
    dendro = agglomerate(d, "average")
    payload = dendro.to_json()
    assert payload["leaf_count"] == 10
    assert sorted(payload["leaf_order"]) == list(range(10))
    rebuilt = Dendrogram(
        payload["leaf_count"],
        [type(dendro.merges[0])(m["node"], m["left"], m["right"], m["height"], m["count"])
         for m in payload["merges"]],
    )
    assert rebuilt.leaf_order() == dendro.leaf_order()
