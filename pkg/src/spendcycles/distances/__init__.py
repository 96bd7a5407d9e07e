"""Pairwise dissimilarity measures and distance-matrix assembly."""

from .matrix import MEASURE_TAGS, DistanceMatrix, Measure, distance_matrix, load_tsdm, save_tsdm
from .measures import (
    acf_dist,
    cor_dist,
    dtw,
    eucl,
    intper_dist,
    per_dist,
    periodogram,
    sbd,
    sdtw,
    specglk_dist,
)

__all__ = [
    "MEASURE_TAGS",
    "DistanceMatrix",
    "Measure",
    "acf_dist",
    "cor_dist",
    "distance_matrix",
    "dtw",
    "eucl",
    "intper_dist",
    "load_tsdm",
    "per_dist",
    "periodogram",
    "save_tsdm",
    "sbd",
    "sdtw",
    "specglk_dist",
]
