"""Cluster entities from a precomputed dissimilarity matrix.

Three families share one result type: agglomerative hierarchical clustering
(Lance-Williams updates, cut to K), PAM k-medoids (BUILD + SWAP), and fuzzy
c-medoids.  Everything is deterministic: ties break toward the smallest
index, and the only randomness hook is an explicit seed kept for interface
uniformity (BUILD initialization is itself deterministic).
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, ShapeError

LINKAGES = ("average", "complete", "single")
METHODS = ("hierarchical", "partitional", "fuzzy")


@dataclass(frozen=True)
class ClusteringConfig:
    method: str
    K: int
    linkage: str = "average"
    fuzzifier_m: float = 2.0
    max_iter: int = 100
    seed: int = 42

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown clustering method {self.method!r}")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"unknown linkage {self.linkage!r}")
        if self.fuzzifier_m <= 1.0:
            raise ConfigError("fuzzifier must exceed 1")


@dataclass
class ClusteringResult:
    config: ClusteringConfig
    assignment: np.ndarray
    membership: np.ndarray = None
    medoids: np.ndarray = None
    dendrogram: np.ndarray = None  # (n-1, 4): left id, right id, height, size
    cost: float = None

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.intp)
        k = self.config.K
        counts = np.bincount(self.assignment, minlength=k)
        if self.assignment.min(initial=0) < 0 or self.assignment.max(initial=0) >= k:
            raise ShapeError("cluster indices out of range")
        if (counts == 0).any():
            raise ShapeError(f"cluster {int(np.argmin(counts > 0))} is empty")

    @property
    def n(self):
        return self.assignment.shape[0]


@dataclass
class Centroid:
    cluster: int
    values: np.ndarray


def _as_dmat(d):
    """Accept a DistanceMatrix or a raw square array; return (array, nonmetric)."""
    nonmetric = bool(getattr(d, "nonmetric", False))
    if hasattr(d, "d"):
        d = d.d
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ShapeError(f"dissimilarity matrix must be square, got {d.shape}")
    if not np.array_equal(d, d.T):
        raise ShapeError("dissimilarity matrix must be symmetric")
    return d, nonmetric


def _check_k(k, n, allow_n=False):
    hi = n if allow_n else n - 1
    if not 2 <= k <= hi:
        raise ConfigError(f"K={k} outside [2, {hi}] for n={n}")


# ---------------------------------------------------------------- hierarchical

def hier_cluster(d, K, linkage="average"):
    """Agglomerative clustering cut to exactly K clusters.

    Merge heights follow Lance-Williams updates for the chosen linkage;
    among equally close pairs the one with the smallest (left, right)
    cluster ids merges first.  The full merge list is retained so other
    cuts can be taken without re-running.
    """
    d, nonmetric = _as_dmat(d)
    n = d.shape[0]
    _check_k(K, n)
    if linkage not in LINKAGES:
        raise ConfigError(f"unknown linkage {linkage!r}")
    if nonmetric and linkage == "single":
        warnings.warn("single linkage on a nonmetric matrix; heights may not be monotone")

    # working matrix indexed by cluster id: leaves 0..n-1, merges n..2n-2
    big = np.full((2 * n - 1, 2 * n - 1), np.inf)
    big[:n, :n] = d
    np.fill_diagonal(big, np.inf)
    sizes = np.ones(2 * n - 1)
    active = list(range(n))  # kept ascending; new ids only ever append
    merges = np.zeros((n - 1, 4))
    for step in range(n - 1):
        ids = np.asarray(active)
        iu, ju = np.triu_indices(len(ids), k=1)
        flat = big[ids[iu], ids[ju]]
        best = int(np.argmin(flat))  # first minimum = smallest (i, j)
        a, b = int(ids[iu[best]]), int(ids[ju[best]])
        height = float(flat[best])
        new = n + step
        rest = ids[(ids != a) & (ids != b)]
        da, db = big[a, rest], big[b, rest]
        if linkage == "single":
            upd = np.minimum(da, db)
        elif linkage == "complete":
            upd = np.maximum(da, db)
        else:
            upd = (sizes[a] * da + sizes[b] * db) / (sizes[a] + sizes[b])
        big[new, rest] = upd
        big[rest, new] = upd
        sizes[new] = sizes[a] + sizes[b]
        active.remove(a)
        active.remove(b)
        active.append(new)
        merges[step] = (a, b, height, sizes[new])

    cfg = ClusteringConfig(method="hierarchical", K=K, linkage=linkage)
    return ClusteringResult(config=cfg, assignment=cut_dendrogram(merges, n, K),
                            dendrogram=merges)


def cut_dendrogram(merges, n, K):
    """Replay the first n-K merges; label clusters by smallest member index."""
    if not 1 <= K <= n:
        raise ConfigError(f"cannot cut {n} leaves into K={K}")
    members = {i: [i] for i in range(n)}
    for step in range(n - K):
        a, b = int(merges[step, 0]), int(merges[step, 1])
        members[n + step] = members.pop(a) + members.pop(b)
    labels = np.empty(n, dtype=np.intp)
    for lab, group in enumerate(sorted(members.values(), key=min)):
        labels[group] = lab
    return labels


# ------------------------------------------------------------------------ PAM

def _build_medoids(d, k):
    """Greedy BUILD: best single medoid, then max-gain additions."""
    n = d.shape[0]
    medoids = [int(np.argmin(d.sum(axis=0)))]
    nearest = d[medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[:, None] - d, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        h = int(np.argmax(gains))
        medoids.append(h)
        np.minimum(nearest, d[h], out=nearest)
    return sorted(medoids)


def _assign_to_medoids(d, medoids):
    """Nearest-medoid labels (ties to the lower medoid index) and cost."""
    sub = d[:, medoids]
    labels = np.argmin(sub, axis=1)
    cost = float(sub[np.arange(d.shape[0]), labels].sum())
    return labels, cost


def _repair_empty(d, medoids, labels):
    """Any empty cluster steals the point farthest from its own medoid."""
    k = len(medoids)
    for _ in range(k):
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return medoids, labels
        dist_own = d[np.arange(d.shape[0]), np.asarray(medoids)[labels]]
        candidates = np.setdiff1d(np.arange(d.shape[0]), medoids)
        if candidates.size == 0:
            break
        far = candidates[int(np.argmax(dist_own[candidates]))]
        medoids = sorted(set(medoids) - {medoids[int(empty[0])]} | {int(far)})
        labels, _ = _assign_to_medoids(d, medoids)
    # duplicate points can starve a medoid no matter the swap: pin medoids
    # to their own clusters, which every K-cluster contract tolerates
    for j, med in enumerate(medoids):
        labels[med] = j
    return medoids, labels


def pam_cluster(d, K, seed=42, max_iter=100):
    """k-medoids: BUILD start, then SWAP passes until no swap lowers cost.

    The seed is accepted for interface uniformity but unused; BUILD makes
    initialization deterministic already.
    """
    d, _ = _as_dmat(d)
    n = d.shape[0]
    _check_k(K, n, allow_n=True)
    medoids = _build_medoids(d, K)
    _, cost = _assign_to_medoids(d, medoids)
    for _ in range(max_iter):
        sub = d[:, medoids]
        order = np.argsort(sub, axis=1, kind="stable")
        j1 = order[:, 0]
        d1 = sub[np.arange(n), j1]
        d2 = sub[np.arange(n), order[:, 1]] if K > 1 else np.full(n, np.inf)
        best_delta, best_swap = -1e-12, None
        for jm in range(K):
            owned = j1 == jm
            delta = np.minimum(d[~owned] - d1[~owned, None], 0.0).sum(axis=0)
            delta += (np.minimum(d[owned], d2[owned, None]) - d1[owned, None]).sum(axis=0)
            delta[medoids] = np.inf
            h = int(np.argmin(delta))
            if delta[h] < best_delta:
                best_delta, best_swap = float(delta[h]), (jm, h)
        if best_swap is None:
            break
        jm, h = best_swap
        new_cost = cost + best_delta
        assert new_cost <= cost  # SWAP only ever descends
        cost = new_cost
        medoids[jm] = h
        medoids.sort()
    labels, cost = _assign_to_medoids(d, medoids)
    medoids, labels = _repair_empty(d, medoids, labels)
    cost = float(d[np.arange(n), np.asarray(medoids)[labels]].sum())
    cfg = ClusteringConfig(method="partitional", K=K, max_iter=max_iter, seed=seed)
    return ClusteringResult(config=cfg, assignment=labels,
                            medoids=np.asarray(medoids, dtype=np.intp), cost=cost)


# -------------------------------------------------------------- fuzzy c-medoids

def _memberships(d, medoids, m):
    """u_ik from inverse-distance ratios; zero distance wins its row."""
    sub = d[:, medoids]
    u = np.zeros_like(sub)
    zero = sub == 0.0
    free = ~zero.any(axis=1)
    # ratios to the row minimum keep the power step in [0, 1]
    ratio = sub[free] / sub[free].min(axis=1, keepdims=True)
    inv = ratio ** (-2.0 / (m - 1.0))
    u[free] = inv / inv.sum(axis=1, keepdims=True)
    pinned = np.flatnonzero(~free)
    u[pinned, np.argmax(zero[pinned], axis=1)] = 1.0
    return u


def fuzzy_cmedoids(d, K, m=2.0, seed=42, max_iter=100, tol=0.0):
    """Fuzzy c-medoids with crisp argmax assignment.

    Medoids update to the point minimizing the weighted distance sum for
    each cluster, kept distinct by greedy choice in cluster order; stops
    when the medoid set is stable, the objective improves by less than
    tol, or max_iter passes elapse.
    """
    d, _ = _as_dmat(d)
    n = d.shape[0]
    _check_k(K, n, allow_n=True)
    if m <= 1.0:
        raise ConfigError("fuzzifier must exceed 1")
    medoids = _build_medoids(d, K)
    prev_obj = np.inf
    for _ in range(max_iter):
        u = _memberships(d, medoids, m)
        scores = d @ (u ** m)  # scores[x, k] = sum_i u_ik^m d(i, x)
        new = []
        for kk in range(K):
            for x in np.argsort(scores[:, kk], kind="stable"):
                if int(x) not in new:
                    new.append(int(x))
                    break
        new.sort()
        obj = float((u ** m * d[:, medoids]).sum())
        if new == medoids or prev_obj - obj <= tol:
            medoids = new
            break
        medoids, prev_obj = new, obj
    u = _memberships(d, medoids, m)
    labels = np.argmax(u, axis=1)
    counts = np.bincount(labels, minlength=K)
    if (counts == 0).any():
        # a medoid whose membership column never wins: pin it to itself
        for j, med in enumerate(medoids):
            if counts[j] == 0:
                labels[med] = j
        counts = np.bincount(labels, minlength=K)
    obj = float((u ** m * d[:, medoids]).sum())
    cfg = ClusteringConfig(method="fuzzy", K=K, fuzzifier_m=m,
                           max_iter=max_iter, seed=seed)
    return ClusteringResult(config=cfg, assignment=labels, membership=u,
                            medoids=np.asarray(medoids, dtype=np.intp), cost=obj)


# ------------------------------------------------------------------- centroids

def hard_assignment(c):
    """Crisp labels from a ClusteringResult or a plain label array."""
    if hasattr(c, "assignment"):
        return np.asarray(c.assignment, dtype=np.intp)
    return np.asarray(c, dtype=np.intp)


def centroids(sm, c):
    """Pointwise mean series per cluster (fuzzy results hardened by argmax)."""
    labels = hard_assignment(c)
    if labels.shape[0] != sm.n:
        raise ShapeError(f"{labels.shape[0]} labels for {sm.n} series")
    out = []
    for kk in range(int(labels.max()) + 1):
        mask = labels == kk
        if not mask.any():
            raise InputError(f"cluster {kk} has no members")
        out.append(Centroid(cluster=kk, values=sm.values[mask].mean(axis=0)))
    return out


# --------------------------------------------------------------- serialization

def write_assignment_csv(labels, entity_names, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "cluster"])
        for name, lab in zip(entity_names, labels):
            w.writerow([name, int(lab)])


def write_membership_csv(membership, entity_names, path):
    k = membership.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity"] + [f"u_{j}" for j in range(k)])
        for name, row in zip(entity_names, membership):
            w.writerow([name] + [repr(float(v)) for v in row])


def write_dendrogram_csv(merges, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "left", "right", "height"])
        for step, (a, b, h, _) in enumerate(merges):
            w.writerow([step, int(a), int(b), repr(float(h))])
