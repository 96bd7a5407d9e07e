"""Pipeline orchestration: config file, artifact cache, manifest, steps.

Each subcommand reads its prerequisite artifacts from the workdir, writes
its own artifacts atomically (temp file, then rename) and appends one
manifest line per artifact recording input hashes and the derived seed.
Re-running a step whose inputs have not changed is a no-op unless forced.
"""

import csv
import hashlib
import json
import os
import tempfile
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

import numpy as np

from . import __version__, clustering, demo
from .clustering import METHODS, centroids
from .distances.matrix import MEASURE_TAGS, Measure, distance_matrix, load_csv, save_csv
from .embed import tsne_embed, write_embedding_csv
from .errors import ConfigError, InputError, PrerequisiteError
from .forecast import forecast as arima_forecast
from .forecast import select_arima, write_forecast_csv
from .ingest import aggregate_weekly, parse_transactions, read_weekly_csv, write_weekly_csv
from .lifecycle import (StageThresholds, build_report, classify_stage,
                        load_clv_fem, stage_features, write_report)
from .motif import SaxConfig, find_motifs, write_motifs_json
from .svg import render_scatter_svg, render_series_svg, write_svg
from .validity import (CRITERIA, run_scheme, score_cells, write_score_tables,
                       write_selection_json)

WORKDIR_ENV = "SPENDCYCLES_WORKDIR"
LOCK_NAME = ".lock"
MANIFEST_NAME = "manifest.jsonl"

STEP_ORDER = ("ingest", "distances", "cluster", "select", "embed", "motif",
              "forecast", "report")

DEFAULTS = {
    "paths": {"input": "transactions.csv", "workdir": "work"},
    "ingest": {"delimiter": ",", "entity_column": "entity",
               "amount_column": "amount", "timestamp_column": "timestamp",
               "span": []},
    "search": {"methods": list(METHODS), "measures": ["EUCL", "DTW", "COR", "ACF"],
               "k_min": 2, "k_max": 10, "criterion": "sim",
               "linkage": "average", "fuzzifier_m": 2.0},
    "seeds": {"root": 42},
    "embed": {"perplexity": 15.0, "iters": 1000, "learning_rate": 200.0},
    "motif": {"window_len": 8, "paa_segments": 4, "alphabet_size": 4,
              "projection_iters": 10, "mask_size": 2, "top": 1},
    "forecast": {"p_max": 3, "q_max": 3, "d_max": 1, "horizon": 3},
    "lifecycle": {"alpha": 0.05, "departure_recent": 0.15,
                  "recession_recent": 0.6, "trend": 0.5, "onset": 0.4},
    "demo": {"per_stage": 12, "weeks": 52, "scale_spread": 0.15, "noise": 0.3},
}


@dataclass
class PipelineConfig:
    doc: dict
    workdir: Path
    input_path: Path

    def section(self, name):
        return self.doc[name]


def _merge_defaults(user):
    doc = {}
    for section, defaults in DEFAULTS.items():
        got = user.get(section, {})
        if not isinstance(got, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        unknown = set(got) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        doc[section] = {**defaults, **got}
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return doc


def _validate(doc):
    search = doc["search"]
    for m in search["methods"]:
        if m not in METHODS:
            raise ConfigError(f"unknown clustering method {m!r}")
    for tag in search["measures"]:
        if tag not in MEASURE_TAGS:
            raise ConfigError(f"unknown measure tag {tag!r}")
    if not 2 <= search["k_min"] <= search["k_max"]:
        raise ConfigError("need 2 <= k_min <= k_max")
    if search["criterion"] not in CRITERIA:
        raise ConfigError(f"criterion must be one of {CRITERIA}")
    if doc["forecast"]["horizon"] < 1:
        raise ConfigError("forecast horizon must be at least 1")
    span = doc["ingest"]["span"]
    if span and len(span) != 2:
        raise ConfigError("ingest span must be [start_week, end_week]")
    # constructing these validates their numeric ranges up front
    SaxConfig(window_len=doc["motif"]["window_len"],
              paa_segments=doc["motif"]["paa_segments"],
              alphabet_size=doc["motif"]["alphabet_size"],
              projection_iters=doc["motif"]["projection_iters"],
              mask_size=doc["motif"]["mask_size"])
    StageThresholds(departure_recent=doc["lifecycle"]["departure_recent"],
                    recession_recent=doc["lifecycle"]["recession_recent"],
                    trend=doc["lifecycle"]["trend"],
                    onset=doc["lifecycle"]["onset"])


def load_config(path=None, workdir=None, overrides=None):
    """Build the run configuration.

    Precedence, highest first: explicit overrides (CLI flags), the
    SPENDCYCLES_WORKDIR environment variable (workdir only), the config
    file, built-in defaults.  A relative input path resolves inside the
    workdir.
    """
    user = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    doc = _merge_defaults(user)
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if section not in doc or key not in doc[section]:
            raise ConfigError(f"unknown override {dotted!r}")
        doc[section][key] = value
    _validate(doc)
    wd = workdir or os.environ.get(WORKDIR_ENV) or doc["paths"]["workdir"]
    wd = Path(wd)
    input_path = Path(doc["paths"]["input"])
    if not input_path.is_absolute():
        input_path = wd / input_path
    return PipelineConfig(doc=doc, workdir=wd, input_path=input_path)


# ----------------------------------------------------------------- plumbing

def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(section):
    return hashlib.sha256(
        json.dumps(section, sort_keys=True).encode()).hexdigest()


def derive_seed(root, name):
    """Per-step seed from the root seed, stable across runs and platforms."""
    digest = hashlib.sha256(f"{root}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@contextmanager
def atomic_path(path):
    """Yield a temp path, atomically renamed over the target on success."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        raise


@contextmanager
def workdir_lock(workdir):
    """One pipeline per workdir: exclusive lock file held for the step."""
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"workdir is locked by another pipeline ({lock}); "
            "remove the file if that run is dead") from None
    try:
        os.close(fd)
        yield
    finally:
        if lock.exists():
            lock.unlink()


class Manifest:
    """Line-delimited JSON ledger, one entry per artifact file."""

    def __init__(self, workdir):
        self.path = Path(workdir) / MANIFEST_NAME

    def entries(self):
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    def latest(self, artifact):
        entry = None
        for doc in self.entries():
            if doc.get("artifact") == artifact:
                entry = doc
        return entry

    def record(self, subcommand, artifact, sha, inputs, seed):
        entry = {"subcommand": subcommand, "artifact": artifact, "sha256": sha,
                 "inputs": inputs, "seed": seed, "version": __version__}
        kept = [e for e in self.entries() if e.get("artifact") != artifact]
        kept.append(entry)
        with atomic_path(self.path) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                for doc in kept:
                    fh.write(json.dumps(doc, sort_keys=True) + "\n")


def _require(cfg, name, producer):
    path = cfg.workdir / name
    if not path.exists():
        raise PrerequisiteError(
            f"missing artifact {name}; run the '{producer}' subcommand first")
    return path


def _up_to_date(cfg, man, artifacts, inputs):
    for name in artifacts:
        entry = man.latest(name)
        if entry is None or entry["inputs"] != inputs:
            return False
        path = cfg.workdir / name
        if not path.exists() or file_sha256(path) != entry["sha256"]:
            return False
    return True


def _publish(cfg, man, subcommand, produced, inputs, seed):
    out = []
    for name in produced:
        path = cfg.workdir / name
        man.record(subcommand, name, file_sha256(path), inputs, seed)
        out.append(path)
    return out


# -------------------------------------------------------------------- steps

def step_demo_data(cfg, force=False):
    man = Manifest(cfg.workdir)
    section = cfg.section("demo")
    seed = derive_seed(cfg.section("seeds")["root"], "demo")
    inputs = {"config": config_hash({**section, "seed": seed})}
    produced = ["transactions.csv", "truth.json"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    with atomic_path(cfg.workdir / "transactions.csv") as tmp:
        truth = demo.write_demo_transactions(
            tmp, seed=seed, per_stage=section["per_stage"],
            weeks=section["weeks"], scale_spread=section["scale_spread"],
            noise=section["noise"])
    with atomic_path(cfg.workdir / "truth.json") as tmp:
        demo.write_truth_json(tmp, truth)
    return _publish(cfg, man, "demo-data", produced, inputs, seed)


def step_ingest(cfg, force=False):
    man = Manifest(cfg.workdir)
    section = cfg.section("ingest")
    if not cfg.input_path.exists():
        raise PrerequisiteError(
            f"input file {cfg.input_path} does not exist; point paths.input "
            "at your transaction log or create one with the 'demo-data' subcommand")
    inputs = {"config": config_hash(section),
              "transactions": file_sha256(cfg.input_path)}
    produced = ["series.csv", "series.meta"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    column_map = {"entity": section["entity_column"],
                  "amount": section["amount_column"],
                  "timestamp": section["timestamp_column"]}
    txns, rejects = parse_transactions(cfg.input_path, column_map,
                                       delimiter=section["delimiter"])
    if rejects:
        warnings.warn(f"ingest rejected {len(rejects)} rows "
                      f"(first: line {rejects[0].line}, {rejects[0].reason})")
    span = tuple(section["span"]) if section["span"] else None
    sm = aggregate_weekly(txns, span=span)
    for msg in sm.warnings:
        warnings.warn(msg)
    with atomic_path(cfg.workdir / "series.csv") as tmp_csv:
        with atomic_path(cfg.workdir / "series.meta") as tmp_meta:
            write_weekly_csv(sm, tmp_csv, tmp_meta)
    return _publish(cfg, man, "ingest", produced, inputs, None)


def _load_series(cfg):
    path = _require(cfg, "series.csv", "ingest")
    meta = _require(cfg, "series.meta", "ingest")
    return read_weekly_csv(path, meta)


def step_distances(cfg, force=False):
    man = Manifest(cfg.workdir)
    series_path = _require(cfg, "series.csv", "ingest")
    tags = list(cfg.section("search")["measures"])
    inputs = {"config": config_hash({"measures": tags}),
              "series.csv": file_sha256(series_path)}
    produced = [f"dist_{tag}.csv" for tag in tags]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    sm = _load_series(cfg)
    written = []
    for tag in tags:
        try:
            dm = distance_matrix(sm, Measure(tag))
        except Exception as exc:
            warnings.warn(f"measure {tag} skipped: {exc}")
            continue
        name = f"dist_{tag}.csv"
        with atomic_path(cfg.workdir / name) as tmp:
            save_csv(dm, tmp)
        written.append(name)
    if not written:
        raise InputError("every configured measure failed on this input")
    return _publish(cfg, man, "distances", written, inputs, None)


def _available_matrices(cfg, tags):
    mats = {}
    for tag in tags:
        path = cfg.workdir / f"dist_{tag}.csv"
        if path.exists():
            mats[tag] = load_csv(path, Measure(tag))
    if not mats:
        raise PrerequisiteError(
            "no distance matrices found; run the 'distances' subcommand first")
    return mats


def step_cluster(cfg, force=False):
    man = Manifest(cfg.workdir)
    search = cfg.section("search")
    mats = _available_matrices(cfg, search["measures"])
    seed = derive_seed(cfg.section("seeds")["root"], "cluster")
    inputs = {"config": config_hash(search), "seed": str(seed)}
    for tag in sorted(mats):
        inputs[f"dist_{tag}.csv"] = file_sha256(cfg.workdir / f"dist_{tag}.csv")
    produced = ["assignments.csv"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    n = next(iter(mats.values())).n
    if search["k_max"] > n - 1:
        raise ConfigError(f"k_max={search['k_max']} too large for {n} entities")
    ks = range(search["k_min"], search["k_max"] + 1)
    rows = []
    for method in search["methods"]:
        for tag in search["measures"]:
            if tag not in mats:
                continue
            for k in ks:
                try:
                    res = run_scheme(mats[tag], method, k,
                                     linkage=search["linkage"],
                                     fuzzifier_m=search["fuzzifier_m"],
                                     seed=seed)
                except Exception as exc:
                    warnings.warn(f"scheme ({method}, {tag}, K={k}) failed: {exc}")
                    continue
                labels = clustering.hard_assignment(res)
                for entity, lab in zip(mats[tag].labels, labels):
                    rows.append([method, tag, k, entity, int(lab)])
    if not rows:
        raise InputError("every clustering scheme failed")
    with atomic_path(cfg.workdir / "assignments.csv") as tmp:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "measure", "K", "entity", "cluster"])
            w.writerows(rows)
    return _publish(cfg, man, "cluster", produced, inputs, seed)


def read_assignments(path):
    """assignments.csv -> {(method, tag, K): (entities, labels)}."""
    cells = {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        next(r)
        for method, tag, k, entity, cluster in r:
            key = (method, tag, int(k))
            cells.setdefault(key, ([], []))
            cells[key][0].append(entity)
            cells[key][1].append(int(cluster))
    return {key: (ents, np.asarray(labs, dtype=np.intp))
            for key, (ents, labs) in cells.items()}


def step_select(cfg, force=False):
    man = Manifest(cfg.workdir)
    search = cfg.section("search")
    assign_path = _require(cfg, "assignments.csv", "cluster")
    mats = _available_matrices(cfg, search["measures"])
    inputs = {"config": config_hash(search),
              "assignments.csv": file_sha256(assign_path)}
    methods_present = sorted({m for m in search["methods"]})
    produced = ["selection.json"] + [f"sim_{m}.csv" for m in methods_present]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    cells = {key: labs for key, (ents, labs) in read_assignments(assign_path).items()}
    scores, selected = score_cells(cells, mats, criterion=search["criterion"])
    with tempfile.TemporaryDirectory(dir=cfg.workdir) as staging:
        table_names = []
        for path in write_score_tables(scores, staging):
            os.replace(path, cfg.workdir / path.name)
            table_names.append(path.name)
    with atomic_path(cfg.workdir / "selection.json") as tmp:
        write_selection_json(selected, tmp)
    produced = ["selection.json"] + sorted(table_names)
    return _publish(cfg, man, "select", produced, inputs, None)


def _selected_cell(cfg):
    sel_path = _require(cfg, "selection.json", "select")
    with open(sel_path, encoding="utf-8") as fh:
        sel = json.load(fh)
    assign_path = _require(cfg, "assignments.csv", "cluster")
    cells = read_assignments(assign_path)
    key = (sel["method"], sel["measure"], int(sel["K"]))
    if key not in cells:
        raise InputError(f"selected scheme {key} not present in assignments.csv")
    entities, labels = cells[key]
    return sel, entities, labels


def step_embed(cfg, force=False):
    man = Manifest(cfg.workdir)
    section = cfg.section("embed")
    sel, entities, labels = _selected_cell(cfg)
    dist_path = _require(cfg, f"dist_{sel['measure']}.csv", "distances")
    seed = derive_seed(cfg.section("seeds")["root"], "embed")
    inputs = {"config": config_hash(section), "seed": str(seed),
              "selection.json": file_sha256(cfg.workdir / "selection.json"),
              "distance": file_sha256(dist_path)}
    produced = ["embedding.csv", "embedding.svg"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    dm = load_csv(dist_path, Measure(sel["measure"]))
    emb = tsne_embed(dm, perplexity=section["perplexity"],
                     iters=section["iters"], seed=seed,
                     learning_rate=section["learning_rate"])
    order = {e: i for i, e in enumerate(entities)}
    assignment = [labels[order[e]] for e in emb.labels]
    with atomic_path(cfg.workdir / "embedding.csv") as tmp:
        write_embedding_csv(emb, assignment, tmp)
    title = (f"t-SNE of {sel['measure']} distances "
             f"({sel['method']}, K={sel['K']})")
    doc = render_scatter_svg(emb.points, labels=emb.labels,
                             clusters=assignment, title=title)
    with atomic_path(cfg.workdir / "embedding.svg") as tmp:
        write_svg(doc, tmp)
    return _publish(cfg, man, "embed", produced, inputs, seed)


def _selected_centroids(cfg):
    sel, entities, labels = _selected_cell(cfg)
    sm = _load_series(cfg)
    order = {e: i for i, e in enumerate(sm.labels)}
    aligned = np.empty(sm.n, dtype=np.intp)
    for e, lab in zip(entities, labels):
        if e not in order:
            raise InputError(f"assignments mention unknown entity {e!r}")
        aligned[order[e]] = lab
    return sel, sm, aligned, centroids(sm, aligned)


def step_motif(cfg, force=False):
    man = Manifest(cfg.workdir)
    section = cfg.section("motif")
    sel, sm, labels, cents = _selected_centroids(cfg)
    seed = derive_seed(cfg.section("seeds")["root"], "motif")
    inputs = {"config": config_hash(section), "seed": str(seed),
              "selection.json": file_sha256(cfg.workdir / "selection.json"),
              "series.csv": file_sha256(cfg.workdir / "series.csv")}
    produced = ["motifs.json", "centroid_motifs.svg"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    sax = SaxConfig(window_len=section["window_len"],
                    paa_segments=section["paa_segments"],
                    alphabet_size=section["alphabet_size"],
                    projection_iters=section["projection_iters"],
                    mask_size=section["mask_size"], seed=seed)
    per_cluster = {}
    annotations = []
    for cent in cents:
        try:
            found = find_motifs(cent.values, sax, top=section["top"])
        except Exception as exc:
            warnings.warn(f"motif mining skipped for cluster {cent.cluster}: {exc}")
            found = []
        per_cluster[cent.cluster] = found
        for m in found:
            annotations.append((cent.cluster, m.pair[0], section["window_len"]))
            annotations.append((cent.cluster, m.pair[1], section["window_len"]))
    with atomic_path(cfg.workdir / "motifs.json") as tmp:
        write_motifs_json(per_cluster, tmp)
    doc = render_series_svg([c.values for c in cents],
                            labels=[f"cluster {c.cluster}" for c in cents],
                            annotations=annotations,
                            title="Cluster centroids with motif windows")
    with atomic_path(cfg.workdir / "centroid_motifs.svg") as tmp:
        write_svg(doc, tmp)
    return _publish(cfg, man, "motif", produced, inputs, seed)


def step_forecast(cfg, force=False):
    man = Manifest(cfg.workdir)
    section = cfg.section("forecast")
    sel, sm, labels, cents = _selected_centroids(cfg)
    inputs = {"config": config_hash(section),
              "selection.json": file_sha256(cfg.workdir / "selection.json"),
              "series.csv": file_sha256(cfg.workdir / "series.csv")}
    produced = ["forecast.csv"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    rows = []
    for cent in cents:
        try:
            fit = select_arima(cent.values, p_max=section["p_max"],
                               q_max=section["q_max"], d_max=section["d_max"])
            fc = arima_forecast(fit, cent.values, section["horizon"])
        except Exception as exc:
            warnings.warn(f"forecast skipped for cluster {cent.cluster}: {exc}")
            continue
        rows.append((cent.cluster, fit, fc))
    if not rows:
        raise InputError("no cluster centroid could be forecast")
    with atomic_path(cfg.workdir / "forecast.csv") as tmp:
        write_forecast_csv(rows, tmp)
    return _publish(cfg, man, "forecast", produced, inputs, None)


def read_forecast_csv(path):
    """forecast.csv -> {cluster: (fit-like, forecast-like)} for the report."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            cluster = int(row[0])
            fit = SimpleNamespace(order=row[1], aic=float(row[2]))
            fc = SimpleNamespace(values=[float(v) for v in row[3:]])
            out[cluster] = (fit, fc)
    return out


def step_report(cfg, force=False):
    man = Manifest(cfg.workdir)
    section = cfg.section("lifecycle")
    sel, sm, labels, cents = _selected_centroids(cfg)
    inputs = {"config": config_hash(section),
              "selection.json": file_sha256(cfg.workdir / "selection.json"),
              "series.csv": file_sha256(cfg.workdir / "series.csv")}
    forecast_path = cfg.workdir / "forecast.csv"
    if forecast_path.exists():
        inputs["forecast.csv"] = file_sha256(forecast_path)
    produced = ["report.md", "report.json"]
    if not force and _up_to_date(cfg, man, produced, inputs):
        return []
    thresholds = StageThresholds(departure_recent=section["departure_recent"],
                                 recession_recent=section["recession_recent"],
                                 trend=section["trend"], onset=section["onset"])
    stages, membership, means = {}, {}, {}
    for cent in cents:
        feats = stage_features(cent.values, alpha=section["alpha"])
        stages[cent.cluster] = classify_stage(feats, thresholds)
        membership[cent.cluster] = [e for e, lab in zip(sm.labels, labels)
                                    if lab == cent.cluster]
        means[cent.cluster] = float(np.mean(cent.values))
    forecasts = read_forecast_csv(forecast_path) if forecast_path.exists() else None
    report = build_report(stages, load_clv_fem(), membership,
                          forecasts=forecasts, centroid_means=means)
    with atomic_path(cfg.workdir / "report.md") as tmp_md:
        with atomic_path(cfg.workdir / "report.json") as tmp_json:
            write_report(report, tmp_md, tmp_json)
    return _publish(cfg, man, "report", produced, inputs, None)


STEPS = {
    "demo-data": step_demo_data,
    "ingest": step_ingest,
    "distances": step_distances,
    "cluster": step_cluster,
    "select": step_select,
    "embed": step_embed,
    "motif": step_motif,
    "forecast": step_forecast,
    "report": step_report,
}


def run(subcommand, cfg, force=False):
    """Execute one subcommand (or 'all'); returns written artifact paths."""
    if subcommand == "all":
        names = STEP_ORDER
    elif subcommand in STEPS:
        names = (subcommand,)
    else:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    written = []
    with workdir_lock(cfg.workdir):
        for name in names:
            written.extend(STEPS[name](cfg, force=force))
    return written
