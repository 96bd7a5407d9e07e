"""Synthetic demo dataset: five lifecycle archetypes plus noise.

The generator is the test substrate for clustering recovery and the
pipeline walkthrough.  Entity names encode the generating archetype so
ground-truth labels are always recoverable.
"""

import csv
import json
from datetime import date, datetime, timedelta, timezone
from hashlib import sha256

import numpy as np

from .errors import InputError
from .ingest import SeriesMatrix

ARCHETYPE_ORDER = ("acquisition", "promotion", "maturity", "recession", "departure")
_PREFIX = {name: name[:3] for name in ARCHETYPE_ORDER}
_STAGE_OF_PREFIX = {p: n for n, p in _PREFIX.items()}


def archetype_values(name, weeks=52):
    """Canonical noise-free centroid shape for one lifecycle stage."""
    t = np.arange(weeks, dtype=np.float64)
    x = t / (weeks - 1)
    if name == "acquisition":
        # silent first half, then a steep linear ramp
        return np.where(x < 0.5, 0.0, (x - 0.5) * 2.0) * 10.0
    if name == "promotion":
        # concave saturating rise from a solid base; differs from
        # acquisition in level profile, not merely onset time
        return 3.0 + 7.0 * np.sqrt(x)
    if name == "maturity":
        # steady plateau with a quarterly wiggle
        return 8.0 + 1.2 * np.sin(2.0 * np.pi * t / 13.0)
    if name == "recession":
        return 10.0 - 8.0 * x
    if name == "departure":
        # early burst, then the customer goes quiet
        return 9.0 * np.exp(-0.5 * ((t - 0.18 * weeks) / (0.07 * weeks)) ** 2)
    raise InputError(f"unknown archetype {name!r}")


def _entity_rng(seed, label):
    # per-entity stream so generation order never changes the draws
    digest = sha256(f"{seed}:{label}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def demo_entities(seed=42, per_stage=12, weeks=52, scale_spread=0.15, noise=0.3):
    """Noisy per-entity weekly amounts, keyed by entity name."""
    if per_stage < 1 or weeks < 8:
        raise InputError("need per_stage >= 1 and weeks >= 8")
    out = {}
    for name in ARCHETYPE_ORDER:
        base = archetype_values(name, weeks)
        for j in range(per_stage):
            label = f"{_PREFIX[name]}_{j:02d}"
            rng = _entity_rng(seed, label)
            scale = 1.0 + rng.uniform(-scale_spread, scale_spread)
            values = base * scale + rng.normal(0.0, noise, weeks)
            out[label] = np.clip(values, 0.0, None)
    return out


def truth_labels(entities):
    """entity name -> generating archetype, decoded from the name prefix."""
    truth = {}
    for label in entities:
        stage = _STAGE_OF_PREFIX.get(label.split("_")[0])
        if stage is None:
            raise InputError(f"entity {label!r} has no archetype prefix")
        truth[label] = stage
    return truth


def demo_matrix(seed=42, per_stage=12, weeks=52, scale_spread=0.15, noise=0.3):
    """SeriesMatrix over the demo entities, labels sorted, plus truth map."""
    entities = demo_entities(seed, per_stage, weeks, scale_spread, noise)
    labels = sorted(entities)
    values = np.vstack([entities[label] for label in labels])
    sm = SeriesMatrix(labels=labels, values=values, grid_start="2017-W01")
    return sm, truth_labels(labels)


def write_demo_transactions(path, seed=42, per_stage=12, weeks=52,
                            scale_spread=0.15, noise=0.3):
    """Emit a raw transaction CSV whose weekly aggregation is demo_matrix.

    One transaction per entity per positive week, stamped Wednesday noon
    UTC of the ISO week, so ingestion reproduces the matrix exactly.
    """
    entities = demo_entities(seed, per_stage, weeks, scale_spread, noise)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "amount", "timestamp"])
        for label in sorted(entities):
            for week, amount in enumerate(entities[label]):
                if amount <= 0.0:
                    continue
                day = date.fromisocalendar(2017, week + 1, 3)
                stamp = datetime(day.year, day.month, day.day, 12,
                                 tzinfo=timezone.utc)
                w.writerow([label, repr(float(amount)), stamp.isoformat()])
    return truth_labels(entities)


def write_truth_json(path, truth):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dict(sorted(truth.items())), fh, indent=2)
        fh.write("\n")
