"""Lifecycle staging of cluster centroids and the marketing report.

Each centroid reduces to four dimensionless shape features; ordered
threshold rules map the features to one of five lifecycle stages; the
report joins stages with the suggestion matrix shipped as an editable JSON
data file (rows = stages, columns = marketing elements, cells = suggestion
ids).
"""

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DegenerateSeriesError, InputError

STAGES = ("acquisition", "promotion", "maturity", "recession", "departure")
EM_DASH = "—"


@dataclass(frozen=True)
class StageFeatures:
    onset_frac: float
    slope_norm: float
    recent_ratio: float
    peak_frac: float


@dataclass(frozen=True)
class Stage:
    tag: str

    def __post_init__(self):
        if self.tag not in STAGES:
            raise InputError(f"unknown stage {self.tag!r}")


@dataclass(frozen=True)
class StageThresholds:
    departure_recent: float = 0.15
    recession_recent: float = 0.6
    trend: float = 0.5
    onset: float = 0.4


@dataclass
class ClvFemMatrix:
    elements: list
    stages: list
    grid: dict  # stage -> element -> list of suggestion ids
    suggestions: dict  # id (int) -> text

    def stage_suggestion_ids(self, stage):
        row = self.grid.get(stage, {})
        ids = sorted({i for ids in row.values() for i in ids})
        return ids


def stage_features(centroid, alpha=0.05):
    """Shape ratios of one centroid series; all scale-free for k>0.

    onset_frac: first week exceeding alpha*max, as a fraction of length.
    slope_norm: OLS slope times length over mean.
    recent_ratio: last-quarter mean over overall mean.
    peak_frac: argmax position as a fraction of length.
    """
    values = np.asarray(getattr(centroid, "values", centroid), dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise InputError("centroid must be a nonempty series")
    peak = float(values.max())
    mean = float(values.mean())
    if peak <= 0.0 or mean == 0.0:
        raise DegenerateSeriesError("centroid has no positive level to stage")
    n = values.size
    onset = int(np.argmax(values > alpha * peak))
    idx = np.arange(n, dtype=np.float64)
    slope = float(np.polyfit(idx, values, 1)[0]) if n > 1 else 0.0
    quarter = max(1, n // 4)
    recent = float(values[-quarter:].mean())
    return StageFeatures(onset_frac=onset / n,
                         slope_norm=slope * n / mean,
                         recent_ratio=recent / mean,
                         peak_frac=int(np.argmax(values)) / n)


def classify_stage(f, thresholds=StageThresholds()):
    """First matching rule wins; the order embodies the stage severity."""
    t = thresholds
    if f.recent_ratio <= t.departure_recent and f.peak_frac < 0.85:
        return Stage("departure")
    if f.slope_norm < -t.trend or (f.recent_ratio <= t.recession_recent
                                   and f.peak_frac < 0.75):
        return Stage("recession")
    if f.onset_frac >= t.onset:
        return Stage("acquisition")
    if f.slope_norm >= t.trend and f.recent_ratio >= 1.0:
        return Stage("promotion")
    return Stage("maturity")


def load_clv_fem(path=None):
    """Load the suggestion matrix, defaulting to the packaged data file."""
    if path is None:
        raw = resources.files("spendcycles").joinpath("data/clv_fem.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    doc = json.loads(raw)
    suggestions = {int(k): v for k, v in doc["suggestions"].items()}
    grid = {}
    seen = set()
    for stage, row in doc["grid"].items():
        if stage not in doc["stages"]:
            raise InputError(f"grid row {stage!r} is not a declared stage")
        grid[stage] = {}
        for element, ids in row.items():
            if element not in doc["elements"]:
                raise InputError(f"grid column {element!r} is not a declared element")
            grid[stage][element] = [int(i) for i in ids]
            seen.update(grid[stage][element])
    missing = set(suggestions) - seen
    if missing:
        raise InputError(f"suggestions never placed in the grid: {sorted(missing)}")
    unknown = seen - set(suggestions)
    if unknown:
        raise InputError(f"grid references unknown suggestion ids: {sorted(unknown)}")
    return ClvFemMatrix(elements=list(doc["elements"]), stages=list(doc["stages"]),
                        grid=grid, suggestions=suggestions)


def high_value_clusters(centroid_means):
    """Clusters whose centroid mean reaches the top tercile."""
    means = {int(k): float(v) for k, v in centroid_means.items()}
    cut = float(np.quantile(sorted(means.values()), 2.0 / 3.0))
    return {k for k, v in means.items() if v >= cut}


def build_report(stages, matrix, membership, forecasts=None, centroid_means=None):
    """Join stages, rosters, suggestions and forecasts into one document.

    stages: cluster id -> Stage; membership: cluster id -> entity names;
    forecasts: optional cluster id -> (ArimaFit, Forecast);
    centroid_means: optional cluster id -> mean level, enabling the
    high-value annotation.  Returns a JSON-ready dict; render_markdown
    turns it into the text document.
    """
    unknown = set(membership) - set(stages)
    if unknown:
        raise InputError(f"membership lists unknown clusters: {sorted(unknown)}")
    high = high_value_clusters(centroid_means) if centroid_means else set()
    clusters = []
    for cluster in sorted(stages):
        stage = stages[cluster]
        ids = matrix.stage_suggestion_ids(stage.tag)
        entry = {
            "cluster": int(cluster),
            "stage": stage.tag,
            "entities": list(membership.get(cluster, [])),
            "high_value": cluster in high,
            "suggestions": [{"id": i, "text": matrix.suggestions[i]} for i in ids],
        }
        if forecasts and cluster in forecasts:
            fit, fc = forecasts[cluster]
            entry["forecast"] = {"model": str(fit.order), "aic": fit.aic,
                                 "values": [float(v) for v in fc.values]}
        clusters.append(entry)
    return {"clusters": clusters,
            "matrix": {"elements": matrix.elements, "stages": matrix.stages,
                       "grid": matrix.grid},
            "suggestions": {str(k): v for k, v in sorted(matrix.suggestions.items())}}


def render_markdown(report):
    lines = ["# Customer lifecycle report", ""]
    for entry in report["clusters"]:
        title = f"## Cluster {entry['cluster']}: {entry['stage']}"
        if entry["high_value"]:
            title += " (high value)"
        lines += [title, ""]
        roster = ", ".join(entry["entities"]) if entry["entities"] else EM_DASH
        lines += [f"Members: {roster}", ""]
        if "forecast" in entry:
            preds = ", ".join(f"{v:.4f}" for v in entry["forecast"]["values"])
            lines += [f"Forecast ({entry['forecast']['model']}, "
                      f"AIC {entry['forecast']['aic']:.4f}): {preds}", ""]
        for s in entry["suggestions"]:
            lines.append(f"- ({s['id']}) {s['text']}")
        lines.append("")
    matrix = report["matrix"]
    lines += ["## Suggestion matrix", ""]
    header = "| stage | " + " | ".join(matrix["elements"]) + " |"
    sep = "|" + " --- |" * (len(matrix["elements"]) + 1)
    lines += [header, sep]
    for stage in matrix["stages"]:
        row = matrix["grid"].get(stage, {})
        cells = []
        for element in matrix["elements"]:
            ids = row.get(element, [])
            cells.append(", ".join(str(i) for i in ids) if ids else EM_DASH)
        lines.append("| " + " | ".join([stage] + cells) + " |")
    lines += ["", "## Suggestion texts", ""]
    for key in sorted(report["suggestions"], key=int):
        lines.append(f"{key}. {report['suggestions'][key]}")
    lines.append("")
    return "\n".join(lines)


def write_report(report, md_path, json_path):
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(md_path, "w", encoding="utf-8") as fh:
        fh.write(render_markdown(report))
