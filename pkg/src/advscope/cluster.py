"""Agglomerative clustering of last-conv neurons by receptive-field distance
and the dendrogram structure behind the cluster view.

Node ids: leaves are 0..n-1 (neuron ids); merge i creates node n+i. The merge
with the smallest linkage distance wins; ties go to the candidate pair with
the smallest (min id, max id).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotFoundError
from .rf import mask_intersection, mask_union, receptive_field

LINKAGES = ("average", "complete", "single")


def neuron_distance_matrix(rf_benign, rf_adversarial):
    """Symmetric n x n distances over concatenated benign+adversarial RFs.

    d(i, j) = sqrt(||b_i - b_j||^2 + ||a_i - a_j||^2) over masked RF images.
    """
    b = np.asarray(rf_benign, dtype=np.float64).reshape(len(rf_benign), -1)
    a = np.asarray(rf_adversarial, dtype=np.float64).reshape(len(rf_adversarial), -1)
    if b.shape[0] != a.shape[0]:
        raise InvalidInputError("benign and adversarial RF counts differ")
    feats = np.concatenate([b, a], axis=1)
    sq = (feats**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (feats @ feats.T)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def pair_rf_images(model, pair, rf_size=None, threshold=0.5):
    """All-neuron RF images for both sides of a pair (n, rf, rf, 3) each."""
    from .nn.model import forward

    out = {}
    for side in ("benign", "adversarial"):
        image = pair.benign if side == "benign" else pair.adversarial
        trace = forward(model, image)
        n = trace.last_conv_maps.shape[0]
        out[side] = np.stack(
            [receptive_field(trace, k, image, rf_size, threshold).image for k in range(n)]
        )
    return out["benign"], out["adversarial"]


@dataclass
class Merge:
    node: int  # id of the created internal node
    left: int
    right: int
    height: float
    count: int  # leaves under this node


@dataclass
class Dendrogram:
    leaf_count: int
    merges: list  # n-1 Merge records in creation order

    @property
    def root(self):
        return self.leaf_count + len(self.merges) - 1

    def children(self, node):
        if node < self.leaf_count:
            return None
        m = self.merges[node - self.leaf_count]
        return m.left, m.right

    def leaves_under(self, node):
        if node < 0 or node > self.root:
            raise NotFoundError(f"unknown dendrogram node {node}")
        stack, leaves = [node], []
        while stack:
            cur = stack.pop()
            kids = self.children(cur)
            if kids is None:
                leaves.append(cur)
            else:
                stack.extend(kids)
        return sorted(leaves)

    def leaf_order(self):
        """Display order: depth-first, smaller-id child subtree first."""
        order = []
        stack = [self.root]
        while stack:
            cur = stack.pop()
            kids = self.children(cur)
            if kids is None:
                order.append(cur)
            else:
                stack.extend(sorted(kids, reverse=True))
        return order

    def to_json(self):
        def node_json(node):
            kids = self.children(node)
            if kids is None:
                return {"id": node, "height": 0.0, "leaf": node, "children": []}
            m = self.merges[node - self.leaf_count]
            return {
                "id": node,
                "height": m.height,
                "children": [node_json(k) for k in sorted(kids)],
            }

        return {
            "leaf_count": self.leaf_count,
            "leaf_order": self.leaf_order(),
            "root": node_json(self.root),
            "merges": [
                {"node": m.node, "left": m.left, "right": m.right,
                 "height": m.height, "count": m.count}
                for m in self.merges
            ],
        }


def _check_matrix(dist):
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 2:
        raise InvalidInputError("distance matrix must be square with n >= 2")
    if not np.allclose(d, d.T) or np.abs(np.diag(d)).max() > 0:
        raise InvalidInputError("distance matrix must be symmetric with zero diagonal")
    return d


def agglomerate(dist, linkage="average"):
    """Agglomerative merge sequence via Lance-Williams distance updates."""
    if linkage not in LINKAGES:
        raise InvalidInputError(f"linkage must be one of {LINKAGES}")
    d = _check_matrix(dist)
    n = d.shape[0]
    # current[id] = row index into the working distance matrix
    active = {i: i for i in range(n)}
    sizes = {i: 1 for i in range(n)}
    work = d.copy()
    merges = []
    for step in range(n - 1):
        ids = sorted(active)
        best = None
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                i, j = ids[ai], ids[bi]
                dij = work[active[i], active[j]]
                key = (dij, i, j)
                if best is None or key < best:
                    best = key
        dij, i, j = best
        new_id = n + step
        merges.append(Merge(new_id, i, j, float(dij), sizes[i] + sizes[j]))
        ri, rj = active[i], active[j]
        for other in ids:
            if other in (i, j):
                continue
            ro = active[other]
            if linkage == "single":
                nd = min(work[ri, ro], work[rj, ro])
            elif linkage == "complete":
                nd = max(work[ri, ro], work[rj, ro])
            else:
                nd = (sizes[i] * work[ri, ro] + sizes[j] * work[rj, ro]) / (
                    sizes[i] + sizes[j]
                )
            work[ri, ro] = work[ro, ri] = nd
        sizes[new_id] = sizes.pop(i) + sizes.pop(j)
        active[new_id] = ri
        del active[i], active[j]
    return Dendrogram(leaf_count=n, merges=merges)


def select_subtree(dendrogram, node_ids):
    """Union of descendant leaves of all given internal/leaf node ids."""
    leaves = set()
    for node in node_ids:
        leaves.update(dendrogram.leaves_under(int(node)))
    return sorted(leaves)


def cluster_rf(model, pair, leaf_set, op="union", side="benign", rf_size=None,
               threshold=0.5):
    """Aggregate RF of a neuron set: mask algebra, then applied to the image."""
    from .nn.model import forward
    from .rf import bilinear_resize

    if op not in ("union", "intersection"):
        raise InvalidInputError("op must be 'union' or 'intersection'")
    if side not in ("benign", "adversarial"):
        raise InvalidInputError("side must be 'benign' or 'adversarial'")
    if not leaf_set:
        raise InvalidInputError("leaf set is empty")
    image = pair.benign if side == "benign" else pair.adversarial
    trace = forward(model, image)
    masks = [
        receptive_field(trace, int(k), image, rf_size, threshold).mask for k in leaf_set
    ]
    combined = mask_union(masks) if op == "union" else mask_intersection(masks)
    size = combined.shape[0]
    return combined, bilinear_resize(image, size, size) * combined[:, :, None]
