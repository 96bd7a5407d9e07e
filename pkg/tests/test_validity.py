"""Partition indices and scheme-grid selection."""

import itertools
import math

import numpy as np
import pytest

from spendcycles.errors import ConfigError, InputError
from spendcycles.ingest import SeriesMatrix
from spendcycles.validity import (
    SchemeScore,
    scheme_search,
    silhouette,
    sim_index,
    variation_of_information,
    write_score_tables,
    write_selection_json,
)


def random_partition(rng, n, kmax):
    while True:
        labels = rng.integers(0, kmax, size=n)
        # compact the label space so every index in [0, K) is used
        _, labels = np.unique(labels, return_inverse=True)
        if labels.max() >= 1 or n == 1:
            return labels


def sim_oracle(a, b):
    """Set-based evaluation, one cluster pair at a time."""
    ca = [set(np.flatnonzero(a == v)) for v in range(a.max() + 1)]
    cb = [set(np.flatnonzero(b == v)) for v in range(b.max() + 1)]
    total = 0.0
    for s in ca:
        total += max(2.0 * len(s & t) / (len(s) + len(t)) for t in cb)
    return total / len(ca)


def vi_oracle(a, b):
    """Direct probability sums over observed label pairs."""
    n = len(a)
    h = 0.0
    for labs in (a, b):
        for v in set(labs.tolist()):
            p = (labs == v).sum() / n
            h += -p * math.log(p)
    mi = 0.0
    for va in set(a.tolist()):
        for vb in set(b.tolist()):
            pab = ((a == va) & (b == vb)).sum() / n
            if pab > 0:
                pa = (a == va).sum() / n
                pb = (b == vb).sum() / n
                mi += pab * math.log(pab / (pa * pb))
    return h - 2 * mi


class TestSimIndex:
    def test_identity_is_one(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a = random_partition(rng, 12, 4)
            assert sim_index(a, a) == 1.0

    def test_hand_example(self):
        a = np.array([0, 0, 1, 1])
        b = np.array([0, 1, 0, 1])
        assert sim_index(a, b) == pytest.approx(0.5, abs=1e-15)

    def test_matches_set_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            a = random_partition(rng, 15, 4)
            b = random_partition(rng, 15, 5)
            assert sim_index(a, b) == pytest.approx(sim_oracle(a, b), abs=1e-12)

    def test_relabeling_invariant(self):
        rng = np.random.default_rng(2)
        a = random_partition(rng, 20, 4)
        b = random_partition(rng, 20, 3)
        perm = rng.permutation(int(a.max()) + 1)
        assert sim_index(perm[a], b) == pytest.approx(sim_index(a, b), abs=1e-15)

    def test_asymmetric_across_k(self):
        a = np.array([0, 0, 0, 1])
        b = np.array([0, 0, 0, 0])
        assert sim_index(a, b) == pytest.approx(22.0 / 35.0, abs=1e-12)
        assert sim_index(b, a) == pytest.approx(6.0 / 7.0, abs=1e-12)

    def test_range(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = random_partition(rng, 10, 5)
            b = random_partition(rng, 10, 5)
            assert 0.0 < sim_index(a, b) <= 1.0

    def test_entity_mismatch(self):
        with pytest.raises(InputError):
            sim_index(np.zeros(3, dtype=int), np.zeros(4, dtype=int))


class TestVariationOfInformation:
    def test_identity_zero(self):
        rng = np.random.default_rng(4)
        a = random_partition(rng, 15, 4)
        assert variation_of_information(a, a) == 0.0

    def test_hand_log4(self):
        ones = np.zeros(4, dtype=int)
        singl = np.arange(4)
        vi = variation_of_information(ones, singl)
        assert vi == pytest.approx(math.log(4), abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        a = random_partition(rng, 18, 3)
        b = random_partition(rng, 18, 5)
        assert variation_of_information(a, b) == pytest.approx(
            variation_of_information(b, a), abs=1e-12)

    def test_matches_probability_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            a = random_partition(rng, 14, 4)
            b = random_partition(rng, 14, 4)
            assert variation_of_information(a, b) == pytest.approx(
                vi_oracle(a, b), abs=1e-10)

    def test_bounded_by_log_n(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = random_partition(rng, 16, 8)
            b = random_partition(rng, 16, 8)
            assert variation_of_information(a, b) <= math.log(16) + 1e-12

    def test_triangle_inequality(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            n = int(rng.integers(4, 21))
            a = random_partition(rng, n, 4)
            b = random_partition(rng, n, 4)
            c = random_partition(rng, n, 4)
            ab = variation_of_information(a, b)
            bc = variation_of_information(b, c)
            ac = variation_of_information(a, c)
            assert ac <= ab + bc + 1e-10


def dmat_from_points(pts):
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


class TestSilhouette:
    def test_separated_identical_groups(self):
        d = np.zeros((6, 6))
        d[:3, 3:] = 5.0
        d[3:, :3] = 5.0
        labels = np.array([0, 0, 0, 1, 1, 1])
        assert silhouette(d, labels) == 1.0

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(20, 2))
        d = dmat_from_points(pts)
        labels = random_partition(rng, 20, 3)
        got = silhouette(d, labels)
        vals = []
        for i in range(20):
            own = [j for j in range(20) if labels[j] == labels[i] and j != i]
            if not own:
                vals.append(0.0)
                continue
            a_i = np.mean([d[i, j] for j in own])
            b_i = min(np.mean([d[i, j] for j in range(20) if labels[j] == cc])
                      for cc in set(labels.tolist()) if cc != labels[i])
            vals.append((b_i - a_i) / max(a_i, b_i))
        assert got == pytest.approx(np.mean(vals), abs=1e-12)

    def test_random_labels_near_zero(self):
        # on i.i.d. noise, random assignments carry no structure
        vals = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d = dmat_from_points(rng.normal(size=(60, 4)))
            labels = random_partition(rng, 60, 3)
            vals.append(silhouette(d, labels))
        assert max(abs(v) for v in vals) < 0.15

    def test_all_singletons_warns_zero(self):
        d = dmat_from_points([0.0, 1.0, 5.0])
        with pytest.warns(UserWarning):
            assert silhouette(d, np.array([0, 1, 2])) == 0.0

    def test_in_range(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            d = dmat_from_points(rng.normal(size=(12, 2)))
            labels = random_partition(rng, 12, 4)
            s = silhouette(d, labels)
            assert -1.0 <= s <= 1.0


def two_group_sm(n_per=4, t=12, seed=0):
    # distinct shapes AND distinct levels, separable under EUCL and COR alike
    rng = np.random.default_rng(seed)
    grid = np.arange(t, dtype=np.float64)
    wave = 3.0 * np.sin(2 * np.pi * grid / 6.0)
    ramp = np.linspace(0.0, 5.0, t) + 10.0
    rows = [wave + rng.normal(0, 0.05, size=t) for _ in range(n_per)]
    rows += [ramp + rng.normal(0, 0.05, size=t) for _ in range(n_per)]
    labels = [f"e{i}" for i in range(2 * n_per)]
    return SeriesMatrix(labels=labels, values=np.stack(rows), grid_start="2017-W18")


class TestSchemeSearch:
    def test_separable_grid_agrees(self):
        sm = two_group_sm()
        scores, selected = scheme_search(sm, ["hierarchical"], ["EUCL", "COR"], [2])
        assert len(scores) == 2
        assert all(s.sim == pytest.approx(1.0) for s in scores)
        assert selected.K == 2

    def test_selected_invariant_to_order(self):
        sm = two_group_sm()
        _, sel1 = scheme_search(sm, ["hierarchical", "partitional"],
                                ["EUCL", "COR"], [2, 3])
        _, sel2 = scheme_search(sm, ["partitional", "hierarchical"],
                                ["COR", "EUCL"], [3, 2])
        assert sel1 == sel2

    def test_deterministic(self):
        sm = two_group_sm(seed=3)
        s1 = scheme_search(sm, ["hierarchical", "fuzzy"], ["EUCL"], [2, 3])
        s2 = scheme_search(sm, ["hierarchical", "fuzzy"], ["EUCL"], [2, 3])
        assert s1 == s2

    def test_sim_ref_override(self):
        sm = two_group_sm()
        truth = np.array([0] * 4 + [1] * 4)
        scores, selected = scheme_search(sm, ["hierarchical"], ["EUCL"],
                                         [2, 3], sim_ref=truth)
        by_k = {s.K: s for s in scores}
        assert by_k[2].sim == pytest.approx(1.0)
        assert by_k[2].vi == pytest.approx(0.0, abs=1e-12)
        assert by_k[3].sim < 1.0
        assert selected.K == 2

    def test_degenerate_measure_excluded(self):
        # constant series break COR; the grid survives on EUCL alone
        values = np.vstack([np.ones((2, 8)),
                            np.arange(8.0)[None, :],
                            np.arange(8.0)[None, :] * 3 + 1])
        sm = SeriesMatrix(labels=["a", "b", "c", "d"], values=values,
                          grid_start="2017-W18")
        with pytest.warns(UserWarning, match="COR"):
            scores, _ = scheme_search(sm, ["hierarchical", "partitional"],
                                      ["EUCL", "COR"], [2])
        assert {s.measure for s in scores} == {"EUCL"}

    def test_bad_k_range(self):
        sm = two_group_sm()
        with pytest.raises(ConfigError):
            scheme_search(sm, ["hierarchical"], ["EUCL"], [1, 2])
        with pytest.raises(ConfigError):
            scheme_search(sm, ["hierarchical"], ["EUCL"], [sm.n])

    def test_single_cell_rejected(self):
        sm = two_group_sm()
        with pytest.raises(InputError):
            scheme_search(sm, ["hierarchical"], ["EUCL"], [2])


class TestScoreOutputs:
    def test_tables_and_json(self, tmp_path):
        sm = two_group_sm()
        scores, selected = scheme_search(sm, ["hierarchical", "partitional"],
                                         ["EUCL", "COR"], [2, 3])
        paths = write_score_tables(scores, tmp_path)
        names = sorted(p.name for p in paths)
        assert names == ["sim_hierarchical.csv", "sim_partitional.csv"]
        lines = (tmp_path / "sim_hierarchical.csv").read_text().splitlines()
        assert lines[0] == "K,COR,EUCL"
        assert [row.split(",")[0] for row in lines[1:]] == ["2", "3"]
        write_selection_json(selected, tmp_path / "sel.json")
        import json
        payload = json.loads((tmp_path / "sel.json").read_text())
        assert payload["method"] == selected.method
        assert payload["K"] == selected.K
