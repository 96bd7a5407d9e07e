"""SAX words and random-projection motif recovery."""

import numpy as np
import pytest

from spendcycles.errors import ConfigError, InputError
from spendcycles.motif import (
    MotifResult,
    SaxConfig,
    breakpoints,
    find_motifs,
    sax_words,
    write_motifs_json,
)


def znorm_dist_oracle(a, b):
    def z(v):
        return (v - v.mean()) / v.std() if v.std() >= 1e-8 else np.zeros_like(v)
    return float(np.sqrt(((z(a) - z(b)) ** 2).sum()))


def plant_burst(seed, n=200, w=20, amplitude=2.1, jitter=0.05):
    """Uniform noise with a duplicated sine burst planted at two starts.

    Both windows hold the same burst with small independent jitter; the
    burst RMS is about 5x the background noise std.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, size=n)
    burst = amplitude * np.sin(2 * np.pi * 1.5 * np.arange(w) / w)
    s1, s2 = 40, 130
    x[s1:s1 + w] = burst + rng.normal(0, jitter, size=w)
    x[s2:s2 + w] = burst + rng.normal(0, jitter, size=w)
    return x, (s1, s2)


class TestBreakpoints:
    def test_quartiles_for_a4(self):
        bps = breakpoints(4)
        assert bps == pytest.approx([-0.6744897501960817, 0.0, 0.6744897501960817],
                                    abs=1e-12)

    def test_median_for_a2(self):
        assert breakpoints(2) == pytest.approx([0.0], abs=0.0)

    def test_equal_mass(self):
        from scipy.stats import norm
        bps = breakpoints(6)
        cdf = norm.cdf(bps)
        assert np.allclose(np.diff(cdf), 1.0 / 6.0, atol=1e-12)


class TestSaxWords:
    def test_word_count(self):
        cfg = SaxConfig(window_len=8, paa_segments=4)
        x = np.random.default_rng(0).normal(size=30)
        words = sax_words(x, cfg)
        assert len(words) == 30 - 8 + 1
        assert [s for s, _ in words] == list(range(23))
        assert all(len(word) == 4 for _, word in words)

    def test_ramp_is_ab(self):
        cfg = SaxConfig(window_len=8, paa_segments=2, alphabet_size=2, mask_size=1)
        words = sax_words(np.arange(8.0), cfg)
        assert words == [(0, "ab")]

    def test_constant_window_middle_symbol(self):
        cfg = SaxConfig(window_len=4, paa_segments=2, alphabet_size=4, mask_size=1)
        words = sax_words(np.ones(6), cfg)
        assert all(word == "cc" for _, word in words)

    def test_alphabet_used_is_bounded(self):
        cfg = SaxConfig(window_len=10, paa_segments=5, alphabet_size=3)
        x = np.random.default_rng(1).normal(size=50)
        for _, word in sax_words(x, cfg):
            assert set(word) <= set("abc")

    def test_too_short(self):
        cfg = SaxConfig(window_len=8, paa_segments=4)
        with pytest.raises(InputError):
            sax_words(np.zeros(5), cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SaxConfig(window_len=4, paa_segments=8)
        with pytest.raises(ConfigError):
            SaxConfig(alphabet_size=11)
        with pytest.raises(ConfigError):
            SaxConfig(paa_segments=4, mask_size=4)


class TestFindMotifs:
    def test_exact_duplicate_pair(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=60)
        x[40:48] = x[10:18]
        cfg = SaxConfig(window_len=8, paa_segments=4, seed=3)
        res = find_motifs(x, cfg, top=1)
        assert len(res) == 1
        m = res[0]
        assert m.pair == (10, 40)
        assert m.distance == 0.0
        assert m.collision_count == cfg.projection_iters
        assert 10 in m.occurrences and 40 in m.occurrences

    def test_planted_burst_recovered(self):
        cfg_base = dict(window_len=20, paa_segments=5, alphabet_size=4,
                        projection_iters=10, mask_size=2)
        hits = 0
        for seed in range(10):
            x, (s1, s2) = plant_burst(seed)
            res = find_motifs(x, SaxConfig(seed=seed, **cfg_base), top=1)
            if res:
                i, j = sorted(res[0].pair)
                if abs(i - s1) <= 2 and abs(j - s2) <= 2:
                    hits += 1
        assert hits >= 9

    def test_no_trivial_pairs(self):
        x = np.sin(np.arange(80) * 0.3)  # self-similar everywhere
        cfg = SaxConfig(window_len=10, paa_segments=5, seed=0)
        for m in find_motifs(x, cfg, top=5):
            assert abs(m.pair[0] - m.pair[1]) >= 10

    def test_ranking_sound(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=120)
        cfg = SaxConfig(window_len=8, paa_segments=4, seed=1)
        res = find_motifs(x, cfg, top=4)
        dists = [m.distance for m in res]
        assert dists == sorted(dists)
        for m in res:
            assert m.distance == pytest.approx(
                znorm_dist_oracle(x[m.pair[0]:m.pair[0] + 8],
                                  x[m.pair[1]:m.pair[1] + 8]), abs=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=100)
        cfg = SaxConfig(seed=7)
        a = find_motifs(x, cfg, top=3)
        b = find_motifs(x, cfg, top=3)
        assert [(m.pair, m.distance, m.collision_count) for m in a] == \
               [(m.pair, m.distance, m.collision_count) for m in b]

    def test_too_short_for_two_windows(self):
        with pytest.raises(InputError):
            find_motifs(np.zeros(15), SaxConfig(window_len=8, paa_segments=4))

    def test_flat_series_gives_zero_distance_pair(self):
        res = find_motifs(np.ones(40), SaxConfig(window_len=8), top=1)
        if res:  # all words identical; any reported pair is a perfect match
            assert res[0].distance == 0.0


class TestJson:
    def test_writer(self, tmp_path):
        m = MotifResult(pair=(3, 20), distance=0.5, occurrences=[3, 20, 33],
                        collision_count=9)
        path = tmp_path / "motifs.json"
        write_motifs_json({1: [m], 0: []}, path)
        import json
        payload = json.loads(path.read_text())
        assert [entry["cluster"] for entry in payload] == [0, 1]
        assert payload[1]["motifs"][0]["pair"] == [3, 20]
        assert payload[1]["motifs"][0]["occurrences"] == [3, 20, 33]
