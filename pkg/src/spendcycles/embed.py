"""2-D t-SNE embedding computed directly from a dissimilarity matrix.

Squared input distances feed per-point Gaussian kernels whose widths are
bisected to a target perplexity; the plane uses the Student-t(1) kernel.
Initial coordinates derive from (seed, entity label), not from row order,
so reordering the input permutes the output points the same way.
"""

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class Embedding:
    labels: list
    points: np.ndarray
    kl_trace: np.ndarray
    params: dict = field(default_factory=dict)


def _label_rng(seed, label):
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _as_sqdist(d):
    labels = getattr(d, "labels", None)
    if hasattr(d, "d"):
        d = d.d
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ShapeError(f"distance matrix must be square, got {d.shape}")
    if not np.array_equal(d, d.T):
        raise ShapeError("distance matrix must be symmetric")
    if labels is None:
        labels = [f"s{i}" for i in range(d.shape[0])]
    return d ** 2, list(labels)


def _row_probs(d2_row, beta):
    """Gaussian affinities for one row (self entry must be masked out)."""
    shifted = d2_row - d2_row.min()
    p = np.exp(-beta * shifted)
    return p / p.sum()


def _perplexity(p):
    nz = p[p > 0]
    h = -(nz * np.log2(nz)).sum()
    return 2.0 ** h


def conditional_probs(d2, perplexity, tol=1e-5, max_iter=50):
    """Per-row affinities calibrated to the target perplexity by bisection.

    Rows where the target is unreachable (ties in the distances cap the
    attainable perplexity) keep the closest beta found after max_iter.
    Returns an n x n matrix with zero diagonal; rows sum to 1.
    """
    n = d2.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        p = _row_probs(row, beta)
        for _ in range(max_iter):
            gap = _perplexity(p) - perplexity
            if abs(gap) <= tol:
                break
            if gap > 0:  # too spread out: sharpen
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (lo + beta) / 2.0
            p = _row_probs(row, beta)
        P[i, np.arange(n) != i] = p
    return P


def kl_and_grad(P, Y, grad_P=None):
    """KL(P || Q) and its gradient in the plane.

    Q is the normalized Student-t(1) kernel of the current points with the
    usual 1e-12 floor.  When grad_P is given (early exaggeration), the
    gradient uses it while the reported KL stays against the true P.
    """
    diff = Y[:, None, :] - Y[None, :, :]
    w = 1.0 / (1.0 + (diff ** 2).sum(axis=2))
    np.fill_diagonal(w, 0.0)
    Q = np.maximum(w / w.sum(), 1e-12)
    mask = ~np.eye(P.shape[0], dtype=bool) & (P > 0)
    kl = float((P[mask] * np.log(P[mask] / Q[mask])).sum())
    G = grad_P if grad_P is not None else P
    grad = 4.0 * (((G - Q) * w)[:, :, None] * diff).sum(axis=1)
    return kl, grad


def tsne_embed(d, perplexity=15.0, iters=1000, seed=42, learning_rate=200.0):
    """Embed entities in the plane; deterministic for a given seed.

    Standard schedule: 12x early exaggeration for the first 250 iterations,
    momentum 0.5 switching to 0.8 at iteration 250, adaptive per-coordinate
    gains, and points recentered every step.
    """
    d2, labels = _as_sqdist(d)
    n = d2.shape[0]
    if not 1.0 < perplexity < (n - 1) / 3.0:
        raise ConfigError(
            f"perplexity {perplexity} infeasible for n={n}; need 1 < p < {(n - 1) / 3:.2f}")
    if iters < 1:
        raise ConfigError("iters must be positive")

    cond = conditional_probs(d2, perplexity)
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)
    np.fill_diagonal(P, 0.0)

    Y = np.stack([_label_rng(seed, lab).normal(size=2) * 1e-4 for lab in labels])
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace = np.empty(iters)
    for it in range(iters):
        exaggerated = P * 12.0 if it < 250 else None
        kl, grad = kl_and_grad(P, Y, grad_P=exaggerated)
        trace[it] = kl
        gains = np.where(np.sign(grad) != np.sign(velocity),
                         gains + 0.2, gains * 0.8)
        np.clip(gains, 0.01, None, out=gains)
        momentum = 0.5 if it < 250 else 0.8
        velocity = momentum * velocity - learning_rate * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    if not np.isfinite(Y).all():
        raise ArithmeticError("embedding diverged to non-finite coordinates")
    params = {"perplexity": perplexity, "iterations": iters,
              "learning_rate": learning_rate, "seed": seed}
    return Embedding(labels=labels, points=Y, kl_trace=trace, params=params)


def write_embedding_csv(emb, assignment, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "x", "y", "cluster"])
        for lab, (x, y), c in zip(emb.labels, emb.points, assignment):
            w.writerow([lab, repr(float(x)), repr(float(y)), int(c)])
