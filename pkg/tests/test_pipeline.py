"""Pipeline orchestration tests: config, caching, manifest, step wiring."""

import csv
import json
import os

import numpy as np
import pytest

from spendcycles import pipeline
from spendcycles.errors import ConfigError, PrerequisiteError
from spendcycles.ingest import read_weekly_csv
from spendcycles.pipeline import (Manifest, PipelineConfig, atomic_path,
                                  derive_seed, load_config, run, workdir_lock)

SMALL_TOML = """\
[search]
measures = ["EUCL", "COR"]
k_min = 2
k_max = 6

[seeds]
root = 7

[embed]
perplexity = 5.0
iters = 120

[motif]
projection_iters = 5

[forecast]
p_max = 1
q_max = 1
horizon = 2

[demo]
per_stage = 4
"""


def small_cfg(tmp_path, name="wd"):
    cfg_path = tmp_path / "cfg.toml"
    if not cfg_path.exists():
        cfg_path.write_text(SMALL_TOML)
    return load_config(cfg_path, workdir=tmp_path / name)


# ------------------------------------------------------------------- config

def test_defaults_without_file(tmp_path):
    cfg = load_config(workdir=tmp_path / "w")
    assert cfg.section("search")["k_min"] == 2
    assert cfg.section("seeds")["root"] == 42
    # relative input resolves inside the workdir
    assert cfg.input_path == tmp_path / "w" / "transactions.csv"


def test_file_values_and_flag_overrides(tmp_path):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text("[seeds]\nroot = 9\n\n[forecast]\nhorizon = 5\n")
    cfg = load_config(cfg_path, workdir=tmp_path / "w")
    assert cfg.section("seeds")["root"] == 9
    assert cfg.section("forecast")["horizon"] == 5
    cfg = load_config(cfg_path, workdir=tmp_path / "w",
                      overrides={"forecast.horizon": 2})
    assert cfg.section("forecast")["horizon"] == 2
    assert cfg.section("seeds")["root"] == 9


def test_env_var_supplies_workdir(tmp_path, monkeypatch):
    monkeypatch.setenv(pipeline.WORKDIR_ENV, str(tmp_path / "envwd"))
    cfg = load_config()
    assert cfg.workdir == tmp_path / "envwd"
    # an explicit workdir still wins over the environment
    cfg = load_config(workdir=tmp_path / "flag")
    assert cfg.workdir == tmp_path / "flag"


@pytest.mark.parametrize("text,fragment", [
    ("[search]\nbogus = 1\n", "unknown keys"),
    ("[nonsense]\nx = 1\n", "unknown config sections"),
    ("[search]\nk_min = 9\nk_max = 3\n", "k_min"),
    ("[search]\nmethods = [\"kmeans\"]\n", "method"),
    ("[search]\nmeasures = [\"XXX\"]\n", "measure"),
    ("[search]\ncriterion = \"gap\"\n", "criterion"),
    ("[forecast]\nhorizon = 0\n", "horizon"),
    ("[ingest]\nspan = [1, 2, 3]\n", "span"),
    ("[motif]\nalphabet_size = 1\n", "alphabet"),
])
def test_config_violations_rejected_up_front(tmp_path, text, fragment):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(text)
    with pytest.raises(ConfigError, match=fragment):
        load_config(cfg_path, workdir=tmp_path / "w")


def test_missing_config_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_unknown_override_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(workdir=tmp_path, overrides={"search.bogus": 1})


def test_unknown_subcommand_rejected(tmp_path):
    cfg = load_config(workdir=tmp_path / "w")
    with pytest.raises(ConfigError):
        run("everything", cfg)


# ---------------------------------------------------------------- plumbing

def test_derive_seed_stable_and_distinct():
    a = derive_seed(42, "demo")
    assert a == derive_seed(42, "demo")
    assert a != derive_seed(42, "embed")
    assert a != derive_seed(43, "demo")


def test_atomic_path_publishes_only_on_success(tmp_path):
    target = tmp_path / "out.txt"
    with atomic_path(target) as tmp:
        tmp.write_text("done")
    assert target.read_text() == "done"
    with pytest.raises(RuntimeError):
        with atomic_path(target) as tmp:
            tmp.write_text("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "done"
    assert not any(p.suffix == ".tmp" for p in tmp_path.iterdir())


def test_workdir_lock_blocks_second_pipeline(tmp_path):
    wd = tmp_path / "w"
    with workdir_lock(wd):
        with pytest.raises(ConfigError, match="locked"):
            with workdir_lock(wd):
                pass
    # released on exit
    with workdir_lock(wd):
        pass


def test_manifest_keeps_one_entry_per_artifact(tmp_path):
    man = Manifest(tmp_path)
    man.record("ingest", "a.csv", "deadbeef", {"x": "1"}, None)
    man.record("ingest", "a.csv", "cafe", {"x": "2"}, None)
    man.record("cluster", "b.csv", "f00d", {}, 3)
    entries = man.entries()
    assert [e["artifact"] for e in entries] == ["a.csv", "b.csv"]
    assert man.latest("a.csv")["sha256"] == "cafe"
    assert man.latest("missing") is None


# -------------------------------------------------------------------- steps

def test_prerequisite_errors_name_producer(tmp_path):
    cfg = small_cfg(tmp_path)
    with pytest.raises(PrerequisiteError, match="demo-data"):
        run("ingest", cfg)
    with pytest.raises(PrerequisiteError, match="'ingest'"):
        run("distances", cfg)
    run("demo-data", cfg)
    run("ingest", cfg)
    with pytest.raises(PrerequisiteError, match="'distances'"):
        run("cluster", cfg)
    run("distances", cfg)
    with pytest.raises(PrerequisiteError, match="'cluster'"):
        run("select", cfg)
    run("cluster", cfg)
    with pytest.raises(PrerequisiteError, match="'select'"):
        run("embed", cfg)


def test_demo_then_ingest_reproduces_matrix_shape(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("ingest", cfg)
    sm = read_weekly_csv(cfg.workdir / "series.csv", cfg.workdir / "series.meta")
    assert sm.n == 20 and sm.t == 52


def test_rerun_is_noop_until_forced(tmp_path):
    cfg = small_cfg(tmp_path)
    first = run("demo-data", cfg)
    assert [p.name for p in first] == ["transactions.csv", "truth.json"]
    assert run("demo-data", cfg) == []
    forced = run("demo-data", cfg, force=True)
    assert [p.name for p in forced] == ["transactions.csv", "truth.json"]


def test_changed_input_invalidates_cache(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("ingest", cfg)
    assert run("ingest", cfg) == []
    with open(cfg.workdir / "transactions.csv", "a", newline="") as fh:
        fh.write("acq_00,1.5,2017-03-01T12:00:00+00:00\n")
    written = run("ingest", cfg)
    assert [p.name for p in written] == ["series.csv", "series.meta"]


def test_changed_config_invalidates_cache(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("ingest", cfg)
    run("distances", cfg)
    assert run("distances", cfg) == []
    cfg.doc["search"]["measures"] = ["EUCL"]
    written = run("distances", cfg)
    assert [p.name for p in written] == ["dist_EUCL.csv"]


def test_all_produces_complete_artifact_set(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("all", cfg)
    expected = {"series.csv", "series.meta", "dist_EUCL.csv", "dist_COR.csv",
                "assignments.csv", "selection.json", "sim_hierarchical.csv",
                "sim_partitional.csv", "sim_fuzzy.csv", "embedding.csv",
                "embedding.svg", "motifs.json", "centroid_motifs.svg",
                "forecast.csv", "report.md", "report.json"}
    present = {p.name for p in cfg.workdir.iterdir()}
    assert expected <= present
    # every artifact is covered by exactly one manifest entry
    man = Manifest(cfg.workdir)
    arts = [e["artifact"] for e in man.entries()]
    assert len(arts) == len(set(arts))
    tracked = set(arts)
    files = present - {"manifest.jsonl"}
    assert files == tracked


def test_manifest_chains_back_to_raw_input(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("ingest", cfg)
    man = Manifest(cfg.workdir)
    txn_sha = man.latest("transactions.csv")["sha256"]
    assert man.latest("series.csv")["inputs"]["transactions"] == txn_sha
    assert man.latest("series.csv")["version"]


def test_two_fresh_runs_are_byte_identical(tmp_path):
    cfg_a = small_cfg(tmp_path, "a")
    cfg_b = small_cfg(tmp_path, "b")
    for cfg in (cfg_a, cfg_b):
        run("demo-data", cfg)
        run("all", cfg)
    names = sorted(p.name for p in cfg_a.workdir.iterdir())
    assert names == sorted(p.name for p in cfg_b.workdir.iterdir())
    for name in names:
        a = (cfg_a.workdir / name).read_bytes()
        b = (cfg_b.workdir / name).read_bytes()
        assert a == b, f"{name} differs between runs"


def test_selection_names_a_configured_scheme(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("all", cfg)
    with open(cfg.workdir / "selection.json") as fh:
        sel = json.load(fh)
    assert sel["method"] in cfg.section("search")["methods"]
    assert sel["measure"] in cfg.section("search")["measures"]
    assert 2 <= sel["K"] <= 6


def test_report_runs_without_forecast_artifact(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    for step in ("ingest", "distances", "cluster", "select"):
        run(step, cfg)
    run("report", cfg)
    text = (cfg.workdir / "report.md").read_text()
    assert "## Cluster" in text
    assert "Forecast" not in text


def test_assignments_csv_is_rectangular(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    for step in ("ingest", "distances", "cluster"):
        run(step, cfg)
    with open(cfg.workdir / "assignments.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["method", "measure", "K", "entity", "cluster"]
    assert all(len(r) == 5 for r in rows)
    # 3 methods x 2 measures x K in 2..6, 20 entities each
    assert len(rows) - 1 == 3 * 2 * 5 * 20


def test_k_range_checked_against_ingested_n(tmp_path):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(SMALL_TOML.replace("k_max = 6", "k_max = 10")
                        .replace("per_stage = 4", "per_stage = 2"))
    cfg = load_config(cfg_path, workdir=tmp_path / "w")
    run("demo-data", cfg)
    run("ingest", cfg)
    run("distances", cfg)
    with pytest.raises(ConfigError, match="k_max"):
        run("cluster", cfg)


def test_forecast_csv_layout(tmp_path):
    cfg = small_cfg(tmp_path)
    run("demo-data", cfg)
    run("all", cfg)
    with open(cfg.workdir / "forecast.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["cluster", "model", "aic", "pred_1", "pred_2"]
    for row in rows[1:]:
        assert row[1].startswith("ARIMA(")
        float(row[2])
        np.array(row[3:], dtype=float)
