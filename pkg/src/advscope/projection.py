"""2D projections of penultimate-layer activations: PCA and exact t-SNE."""

import numpy as np

from .errors import InvalidInputError

TSNE_ITERATIONS = 1000
TSNE_DEFAULT_PERPLEXITY = 30.0


def pca_2d(features):
    """Top-2 principal components, deterministic up to a fixed sign rule."""
    x = np.asarray(features, dtype=np.float64)
    x = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(x, full_matrices=False)
    comps = vt[:2]
    for i in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    if comps.shape[0] < 2:  # fewer features than 2: pad a zero axis
        comps = np.vstack([comps, np.zeros((2 - comps.shape[0], comps.shape[1]))])
    return x @ comps.T


def _pairwise_sq_dists(x):
    sq = (x**2).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _conditional_probs(dists, perplexity, tol=1e-5, max_iter=60):
    """Binary-search per-point precisions so each row's entropy hits log(perplexity)."""
    n = dists.shape[0]
    p = np.zeros((n, n))
    target = np.log(perplexity)
    for i in range(n):
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        row = np.delete(dists[i], i)
        for _ in range(max_iter):
            expd = np.exp(-row * beta)
            total = expd.sum()
            if total <= 0:
                h = 0.0
                probs = np.zeros_like(row)
            else:
                probs = expd / total
                h = np.log(total) + beta * (row * probs).sum()
            if abs(h - target) < tol:
                break
            if h > target:
                beta_lo = beta
                beta = beta * 2 if beta_hi == np.inf else (beta + beta_hi) / 2
            else:
                beta_hi = beta
                beta = (beta + beta_lo) / 2
        p[i, np.arange(n) != i] = probs
    return p


def _kl_divergence(p, q):
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / np.maximum(q[mask], 1e-12))).sum())


def tsne_2d(features, perplexity=TSNE_DEFAULT_PERPLEXITY, seed=0,
            iterations=TSNE_ITERATIONS, return_kl=False):
    """Exact (quadratic) t-SNE with seeded init.

    Perplexity is clamped to (n - 1) / 3 so small inputs never error. Uses
    early exaggeration for the first 100 iterations and momentum 0.5 -> 0.8.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise InvalidInputError("t-SNE needs at least 3 points")
    perplexity = min(perplexity, (n - 1) / 3.0)
    perplexity = max(perplexity, 1.0)
    cond = _conditional_probs(_pairwise_sq_dists(x), perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, (n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration = 4.0
    initial_kl = None
    for it in range(iterations):
        peff = p * exaggeration if it < 100 else p
        num = 1.0 / (1.0 + _pairwise_sq_dists(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        if it == 0:
            initial_kl = _kl_divergence(p, q)
        # gradient of KL: 4 * sum_j (p_ij - q_ij) (y_i - y_j) num_ij
        w = (peff - q) * num
        grad = 4.0 * ((np.diag(w.sum(axis=1)) - w) @ y)
        momentum = 0.5 if it < 250 else 0.8
        sign_match = np.sign(grad) == np.sign(update)
        gains = np.where(sign_match, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - 200.0 * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    num = 1.0 / (1.0 + _pairwise_sq_dists(y))
    np.fill_diagonal(num, 0.0)
    final_kl = _kl_divergence(p, np.maximum(num / num.sum(), 1e-12))
    if return_kl:
        return y, initial_kl, final_kl
    return y
