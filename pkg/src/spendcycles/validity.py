"""Score partitions and search the clustering scheme grid.

A "scheme" is one (method, measure, K) combination.  Because no ground
truth exists at analysis time, each scheme's Sim score is the mean
similarity to the other schemes at the same K (a consensus reading), with
an optional external reference partition overriding that.  The best scheme
wins on the configured criterion, ties going to the higher silhouette and
then the lower K.
"""

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .clustering import fuzzy_cmedoids, hard_assignment, hier_cluster, pam_cluster
from .distances.matrix import Measure, distance_matrix
from .errors import ConfigError, InputError

CRITERIA = ("sim", "silhouette")


@dataclass(frozen=True)
class SchemeScore:
    method: str
    measure: str
    K: int
    sim: float
    silhouette: float
    vi: float


def _pair_labels(a, b):
    a, b = hard_assignment(a), hard_assignment(b)
    if a.shape[0] != b.shape[0]:
        raise InputError(f"partitions cover {a.shape[0]} vs {b.shape[0]} entities")
    return a, b


def _contingency(a, b):
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def sim_index(a, b):
    """Mean best cluster overlap of a's clusters among b's clusters.

    Each cluster of the first partition keeps its best Dice overlap
    2|A_i conj B_j| / (|A_i|+|B_j|); the mean over A's clusters lands in
    (0, 1].  Asymmetric when the two partitions have different cluster
    counts since the average is over the first argument's clusters.
    """
    a, b = _pair_labels(a, b)
    table = _contingency(a, b)
    sa = table.sum(axis=1, keepdims=True)
    sb = table.sum(axis=0, keepdims=True)
    overlap = 2.0 * table / (sa + sb)
    return float(overlap.max(axis=1).mean())


def variation_of_information(a, b):
    """VI = H(A) + H(B) - 2 I(A;B), natural logs; 0 iff identical."""
    a, b = _pair_labels(a, b)
    n = a.shape[0]
    table = _contingency(a, b)
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    pab = table / n

    def entropy(p):
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())

    ha, hb = entropy(pa), entropy(pb)
    mask = table > 0
    mi = float((pab[mask] * np.log(pab[mask] / np.outer(pa, pb)[mask])).sum())
    return max(0.0, ha + hb - 2.0 * mi)


def silhouette(d, c):
    """Mean silhouette width from a precomputed dissimilarity matrix.

    a_i is the mean distance to the rest of the own cluster, b_i the
    smallest mean distance to another cluster; singletons score 0.
    """
    labels = hard_assignment(c)
    dm = d.d if hasattr(d, "d") else np.asarray(d, dtype=np.float64)
    n = labels.shape[0]
    if dm.shape != (n, n):
        raise InputError(f"matrix {dm.shape} does not cover {n} entities")
    k = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=k)
    if k >= n:
        warnings.warn("every entity is a singleton; silhouette is 0 by convention")
        return 0.0
    # sums[i, c] = total distance from i to cluster c
    sums = np.zeros((n, k))
    for cc in range(k):
        sums[:, cc] = dm[:, labels == cc].sum(axis=1)
    own = counts[labels]
    s = np.zeros(n)
    for i in range(n):
        if own[i] == 1:
            continue
        a_i = sums[i, labels[i]] / (own[i] - 1)
        other = [sums[i, cc] / counts[cc] for cc in range(k) if cc != labels[i] and counts[cc] > 0]
        b_i = min(other)
        s[i] = (b_i - a_i) / max(a_i, b_i) if max(a_i, b_i) > 0 else 0.0
    return float(s.mean())


def run_scheme(dm, method, K, linkage="average", fuzzifier_m=2.0, seed=42,
               max_iter=100):
    """Dispatch one scheme; the caller supplies the measure's matrix."""
    if method == "hierarchical":
        return hier_cluster(dm, K, linkage=linkage)
    if method == "partitional":
        return pam_cluster(dm, K, seed=seed, max_iter=max_iter)
    if method == "fuzzy":
        return fuzzy_cmedoids(dm, K, m=fuzzifier_m, seed=seed, max_iter=max_iter)
    raise ConfigError(f"unknown clustering method {method!r}")


def _coerce_measures(measures):
    out = []
    for m in measures:
        out.append(m if isinstance(m, Measure) else Measure(str(m)))
    return out


def scheme_search(sm, methods, measures, K_range, criterion="sim",
                  sim_ref=None, linkage="average", fuzzifier_m=2.0, seed=42,
                  max_iter=100):
    """Cluster every (method, measure, K) cell and pick the best scheme.

    Returns (scores, selected).  Schemes that fail (degenerate measure,
    singular configuration) are dropped with a warning rather than
    aborting the grid.  With sim_ref given, Sim is computed against that
    partition instead of the same-K consensus.
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"criterion must be one of {CRITERIA}")
    measures = _coerce_measures(measures)
    ks = sorted(set(int(k) for k in K_range))
    if not ks:
        raise ConfigError("empty K range")
    if any(k < 2 or k >= sm.n for k in ks):
        raise ConfigError(f"K range must stay within [2, {sm.n - 1}]")
    if sim_ref is not None:
        sim_ref = np.asarray(sim_ref, dtype=np.intp)

    mats = {}
    for meas in measures:
        try:
            mats[meas.tag] = distance_matrix(sm, meas)
        except Exception as exc:
            warnings.warn(f"measure {meas.tag} failed: {exc}")

    cells = {}
    for method in methods:
        for meas in measures:
            if meas.tag not in mats:
                continue
            for k in ks:
                try:
                    res = run_scheme(mats[meas.tag], method, k, linkage=linkage,
                                     fuzzifier_m=fuzzifier_m, seed=seed,
                                     max_iter=max_iter)
                except Exception as exc:
                    warnings.warn(f"scheme ({method}, {meas.tag}, K={k}) failed: {exc}")
                    continue
                cells[(method, meas.tag, k)] = hard_assignment(res)
    return score_cells(cells, mats, criterion=criterion, sim_ref=sim_ref)


def score_cells(cells, mats, criterion="sim", sim_ref=None):
    """Score precomputed scheme assignments and pick the winner.

    cells: (method, measure tag, K) -> label array; mats: tag -> distance
    matrix for silhouette.  Without sim_ref, Sim and VI are each scheme's
    mean agreement with the other schemes at the same K.
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"criterion must be one of {CRITERIA}")
    if len(cells) < 2:
        raise InputError("fewer than two schemes succeeded; nothing to compare")
    if sim_ref is not None:
        sim_ref = np.asarray(sim_ref, dtype=np.intp)

    scores = []
    for (method, tag, k), labels in cells.items():
        if sim_ref is not None:
            sim = sim_index(labels, sim_ref)
            vi = variation_of_information(labels, sim_ref)
        else:
            peers = [v for key, v in cells.items()
                     if key[2] == k and key != (method, tag, k)]
            if peers:
                sim = float(np.mean([sim_index(labels, p) for p in peers]))
                vi = float(np.mean([variation_of_information(labels, p) for p in peers]))
            else:
                sim, vi = 1.0, 0.0
        sil = silhouette(mats[tag], labels)
        scores.append(SchemeScore(method=method, measure=tag, K=k,
                                  sim=sim, silhouette=sil, vi=vi))
    for sc in scores:
        if not (math.isfinite(sc.sim) and math.isfinite(sc.silhouette)
                and math.isfinite(sc.vi)):
            raise InputError(f"non-finite score for ({sc.method}, {sc.measure}, K={sc.K})")

    if criterion == "sim":
        def key(s):
            return (-s.sim, -s.silhouette, s.K, s.method, s.measure)
    else:
        def key(s):
            return (-s.silhouette, -s.sim, s.K, s.method, s.measure)
    selected = min(scores, key=key)
    return scores, selected


def write_score_tables(scores, out_dir):
    """One CSV per method: rows = K, columns = measures, cells = Sim."""
    from pathlib import Path
    out_dir = Path(out_dir)
    methods = sorted({s.method for s in scores})
    paths = []
    for method in methods:
        rows = sorted({s.K for s in scores if s.method == method})
        cols = sorted({s.measure for s in scores if s.method == method})
        cell = {(s.K, s.measure): s.sim for s in scores if s.method == method}
        path = out_dir / f"sim_{method}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["K"] + cols)
            for k in rows:
                w.writerow([k] + [repr(cell[(k, c)]) if (k, c) in cell else ""
                                  for c in cols])
        paths.append(path)
    return paths


def write_selection_json(selected, path):
    payload = {"method": selected.method, "measure": selected.measure,
               "K": selected.K, "sim": selected.sim,
               "silhouette": selected.silhouette, "vi": selected.vi}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
