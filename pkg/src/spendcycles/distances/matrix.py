"""Measure configuration, distance matrices, and their file formats."""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DegenerateSeriesError, InputError, ShapeError
from . import measures as ms

MEASURE_TAGS = ("EUCL", "DTW", "SDTW", "SBD", "COR", "ACF", "PACF", "PER", "INTPER", "SPECGLK")

_TSDM_MAGIC = b"TSDM"
_TSDM_VERSION = 1


@dataclass(frozen=True)
class Measure:
    """One dissimilarity measure plus its parameters.

    ``lags`` applies to ACF/PACF (None picks min(n//4, 25)); ``gamma`` to
    SDTW; ``window`` to DTW (0 = unconstrained); ``bandwidth`` to SPECGLK.
    """

    tag: str
    lags: int | None = None
    gamma: float = 1.0
    window: int = 0
    bandwidth: float = 0.1

    def __post_init__(self):
        if self.tag not in MEASURE_TAGS:
            raise ConfigError(f"unknown measure tag {self.tag!r}; expected one of {MEASURE_TAGS}")
        if self.lags is not None and self.lags < 1:
            raise ConfigError("lags must be >= 1")
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if self.window < 0:
            raise ConfigError("window must be >= 0")
        if not 0.0 < self.bandwidth <= 0.5:
            raise ConfigError("bandwidth must lie in (0, 0.5]")

    @property
    def nonmetric(self):
        """Soft-DTW may be negative and has a nonzero diagonal."""
        return self.tag == "SDTW"

    def pairwise(self, x, y):
        """Evaluate this measure on one pair of series."""
        if self.tag == "EUCL":
            return ms.eucl(x, y)
        if self.tag == "DTW":
            return ms.dtw(x, y, self.window)
        if self.tag == "SDTW":
            return ms.sdtw(x, y, self.gamma)
        if self.tag == "SBD":
            return ms.sbd(x, y)
        if self.tag == "COR":
            return ms.cor_dist(x, y)
        if self.tag == "ACF":
            return ms.acf_dist(x, y, self.lags, partial=False)
        if self.tag == "PACF":
            return ms.acf_dist(x, y, self.lags, partial=True)
        if self.tag == "PER":
            return ms.per_dist(x, y)
        if self.tag == "INTPER":
            return ms.intper_dist(x, y)
        return ms.specglk_dist(x, y, self.bandwidth)


@dataclass
class DistanceMatrix:
    """Symmetric pairwise dissimilarities under one measure."""

    measure: Measure
    labels: list[str] = field(default_factory=list)
    d: np.ndarray = None

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64)
        n = len(self.labels)
        if self.d.shape != (n, n):
            raise ShapeError(f"matrix shape {self.d.shape} does not match {n} labels")

    @property
    def n(self):
        return len(self.labels)

    @property
    def nonmetric(self):
        return self.measure.nonmetric


def _pairwise_l2(feats):
    """All-pairs Euclidean via broadcasting.

    Deliberately not the Gram-matrix trick: direct differencing reduces the
    same values in the same order as the single-pair ops, so identical rows
    come out at exactly zero.
    """
    diff = feats[:, None, :] - feats[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=2))


def _precheck(values, labels, tag, lags):
    """Fail loudly on series a measure cannot handle, naming the pair."""
    bad = None
    if tag in ("COR", "ACF", "PACF"):
        bad = np.where(values.std(axis=1) == 0.0)[0]
        why = "constant series"
    elif tag == "SBD":
        bad = np.where(np.all(values == 0.0, axis=1))[0]
        why = "all-zero series"
    elif tag in ("PER", "INTPER", "SPECGLK"):
        centered = values - values.mean(axis=1, keepdims=True)
        bad = np.where(np.all(centered == 0.0, axis=1))[0]
        why = "zero total periodogram intensity"
    if bad is not None and bad.size:
        i = int(bad[0])
        j = 0 if i != 0 else 1
        raise DegenerateSeriesError(
            f"{tag}: {why} for entity {labels[i]!r} "
            f"(first failing pair: {labels[i]!r}, {labels[j]!r})")


def distance_matrix(sm, measure):
    """Full symmetric distance matrix over a series matrix.

    Feature-based measures (EUCL, COR, ACF, PACF, PER, INTPER) are computed
    from per-series embeddings in one vectorised pass; the warping measures
    loop over the upper triangle and mirror.  The result is independent of
    pair evaluation order and identical to calling the pairwise ops
    one pair at a time.
    """
    values = np.asarray(sm.values, dtype=np.float64)
    labels = list(sm.labels)
    n = values.shape[0]
    if n < 2:
        raise InputError("distance_matrix needs at least 2 series")
    tag = measure.tag
    _precheck(values, labels, tag, measure.lags)

    if tag == "EUCL":
        d = _pairwise_l2(values)
    elif tag == "COR":
        d = _pairwise_l2(np.stack([ms.standardized(v) for v in values]))
    elif tag in ("ACF", "PACF"):
        lags = measure.lags if measure.lags is not None else ms.default_lags(values.shape[1])
        feats = np.stack([ms.acf_features(v, lags, partial=(tag == "PACF")) for v in values])
        d = _pairwise_l2(feats)
    elif tag == "PER":
        feats = np.stack([ms._norm_periodogram(v, labels[i]) for i, v in enumerate(values)])
        d = _pairwise_l2(feats)
    elif tag == "INTPER":
        feats = np.cumsum(
            np.stack([ms._norm_periodogram(v, labels[i]) for i, v in enumerate(values)]), axis=1)
        d = np.sum(np.abs(feats[:, None, :] - feats[None, :, :]), axis=2)
    else:
        d = np.zeros((n, n))
        for i in range(n):
            lo = i if tag == "SDTW" else i + 1  # SDTW has a nonzero diagonal
            for j in range(lo, n):
                try:
                    d[i, j] = measure.pairwise(values[i], values[j])
                except DegenerateSeriesError as exc:
                    raise DegenerateSeriesError(
                        f"{tag}: pair ({labels[i]!r}, {labels[j]!r}): {exc}") from exc
                d[j, i] = d[i, j]
    if tag != "SDTW":
        np.fill_diagonal(d, 0.0)
    return DistanceMatrix(measure=measure, labels=labels, d=d)


def save_csv(dm, path):
    """Square CSV: header row of labels, then one numeric row per entity."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dm.labels)
        for row in dm.d:
            w.writerow([repr(float(v)) for v in row])


def load_csv(path, measure):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        labels = next(r)
        rows = [[float(v) for v in row] for row in r]
    return DistanceMatrix(measure=measure, labels=labels, d=np.array(rows))


def save_tsdm(path, labels, d):
    """Compact binary layout: magic "TSDM", version u8, n as u32 LE,
    length-prefixed UTF-8 labels, then row-major float64 LE."""
    d = np.asarray(d, dtype=np.float64)
    n = len(labels)
    if d.shape != (n, n):
        raise ShapeError(f"matrix shape {d.shape} does not match {n} labels")
    with open(path, "wb") as fh:
        fh.write(_TSDM_MAGIC)
        fh.write(struct.pack("<B", _TSDM_VERSION))
        fh.write(struct.pack("<I", n))
        for lab in labels:
            raw = lab.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(d.astype("<f8").tobytes(order="C"))


def load_tsdm(path):
    """Read a TSDM file back as ``(labels, matrix)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != _TSDM_MAGIC:
            raise InputError(f"{path}: not a TSDM file")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != _TSDM_VERSION:
            raise InputError(f"{path}: unsupported TSDM version {version}")
        (n,) = struct.unpack("<I", fh.read(4))
        labels = []
        for _ in range(n):
            (ln,) = struct.unpack("<H", fh.read(2))
            labels.append(fh.read(ln).decode("utf-8"))
        body = fh.read(8 * n * n)
        d = np.frombuffer(body, dtype="<f8").reshape(n, n).copy()
    return labels, d
