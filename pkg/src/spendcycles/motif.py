"""Repeated-segment discovery via SAX words and random projection.

Sliding windows become short symbol words (z-normalize, piecewise means,
standard-normal breakpoints).  Random projection repeatedly masks a few
word positions and counts word collisions; pairs colliding unusually often
are verified on the raw values with a z-normalized Euclidean distance.
"""

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, InputError

ALPHABET = "abcdefghij"


@dataclass(frozen=True)
class SaxConfig:
    window_len: int = 8
    paa_segments: int = 4
    alphabet_size: int = 4
    projection_iters: int = 10
    mask_size: int = 2
    seed: int = 42

    def __post_init__(self):
        if self.paa_segments > self.window_len:
            raise ConfigError("more segments than window points")
        if not 2 <= self.alphabet_size <= 10:
            raise ConfigError("alphabet size must lie in [2, 10]")
        if not 0 < self.mask_size < self.paa_segments:
            raise ConfigError("mask size must lie in [1, paa_segments)")
        if self.window_len < 2 or self.projection_iters < 1:
            raise ConfigError("window and projection counts must be positive")


@dataclass
class MotifResult:
    pair: tuple
    distance: float
    occurrences: list
    collision_count: int


def breakpoints(alphabet_size):
    """Standard-normal quantiles splitting the line into equal-mass bins."""
    qs = np.arange(1, alphabet_size) / alphabet_size
    return norm.ppf(qs)


def _znorm(window):
    mu = window.mean()
    sd = window.std()
    if sd < 1e-8:
        return None
    return (window - mu) / sd


def _paa(window, segments):
    return np.array([seg.mean() for seg in np.array_split(window, segments)])


def sax_words(x, cfg):
    """(start, word) for every sliding window of cfg.window_len."""
    x = np.asarray(x, dtype=np.float64)
    w = cfg.window_len
    if x.ndim != 1 or x.shape[0] < w:
        raise InputError(f"series of length {x.shape[0]} shorter than window {w}")
    bps = breakpoints(cfg.alphabet_size)
    middle = ALPHABET[int(np.searchsorted(bps, 0.0, side="right"))]
    out = []
    for start in range(x.shape[0] - w + 1):
        z = _znorm(x[start:start + w])
        if z is None:
            word = middle * cfg.paa_segments
        else:
            syms = np.searchsorted(bps, _paa(z, cfg.paa_segments), side="right")
            word = "".join(ALPHABET[s] for s in syms)
        out.append((start, word))
    return out


def _zdist(a, b):
    za, zb = _znorm(a), _znorm(b)
    za = np.zeros_like(a) if za is None else za
    zb = np.zeros_like(b) if zb is None else zb
    return float(np.sqrt(((za - zb) ** 2).sum()))


def find_motifs(x, cfg=SaxConfig(), top=1):
    """Best repeated segments of x, ranked by verified distance.

    Collision counting runs cfg.projection_iters masked-word rounds with a
    generator seeded by cfg.seed.  Candidates need a count at or above
    mean + 2 std of the nonzero counts; window pairs overlapping by any
    amount never count as motifs.  Returns [] when nothing verifies.
    """
    x = np.asarray(x, dtype=np.float64)
    w = cfg.window_len
    if x.ndim != 1 or x.shape[0] < 2 * w:
        raise InputError(
            f"series of length {x.shape[0]} cannot host two windows of {w}")
    words = sax_words(x, cfg)
    n = len(words)
    rng = np.random.default_rng(cfg.seed)
    counts = {}
    for _ in range(cfg.projection_iters):
        keep = np.sort(rng.permutation(cfg.paa_segments)[cfg.mask_size:])
        buckets = {}
        for start, word in words:
            key = "".join(word[i] for i in keep)
            buckets.setdefault(key, []).append(start)
        for bucket in buckets.values():
            for i, j in combinations(bucket, 2):
                counts[(i, j)] = counts.get((i, j), 0) + 1

    if not counts:
        return []
    vals = np.array(list(counts.values()), dtype=np.float64)
    threshold = vals.mean() + 2.0 * vals.std()
    candidates = [(pair, c) for pair, c in sorted(counts.items())
                  if c >= threshold and abs(pair[0] - pair[1]) >= w]
    verified = []
    for (i, j), c in candidates:
        dist = _zdist(x[i:i + w], x[j:j + w])
        verified.append((dist, (i, j), c))
    verified.sort(key=lambda t: (t[0], t[1]))

    results = []
    for dist, (i, j), c in verified[:top]:
        radius = 2.0 * dist
        occ = []
        for s in range(n):
            if min(_zdist(x[s:s + w], x[i:i + w]),
                   _zdist(x[s:s + w], x[j:j + w])) <= radius:
                occ.append(s)
        results.append(MotifResult(pair=(i, j), distance=dist,
                                   occurrences=occ, collision_count=c))
    return results


def write_motifs_json(per_cluster, path):
    """per_cluster: mapping of cluster index to a list of MotifResult."""
    payload = []
    for cluster in sorted(per_cluster):
        payload.append({
            "cluster": int(cluster),
            "motifs": [{"pair": [int(m.pair[0]), int(m.pair[1])],
                        "distance": m.distance,
                        "occurrences": [int(s) for s in m.occurrences],
                        "collision_count": int(m.collision_count)}
                       for m in per_cluster[cluster]],
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
