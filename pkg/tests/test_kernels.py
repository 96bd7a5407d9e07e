"""Backend agreement: compiled warping kernels vs the numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from spendcycles import kernels
from spendcycles.kernels import _warp_py

compiled = pytest.importorskip(
    "spendcycles.kernels._warp",
    reason="compiled extension not built; run pip install -e . --no-build-isolation")


def _pairs(trials=60):
    rng = np.random.default_rng(20240304)
    for _ in range(trials):
        n = int(rng.integers(2, 40))
        m = int(rng.integers(2, 40))
        yield rng.normal(size=n), rng.normal(size=m)


def test_dtw_backends_agree_unconstrained():
    for x, y in _pairs():
        a = compiled.dtw_sqcost(x, y, 0)
        b = _warp_py.dtw_sqcost(x, y, 0)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_dtw_backends_agree_banded():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(5, 30))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        w = int(rng.integers(1, n))
        a = compiled.dtw_sqcost(x, y, w)
        b = _warp_py.dtw_sqcost(x, y, w)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_dtw_band_too_narrow_is_infinite_in_both():
    x = np.arange(10.0)
    y = np.arange(3.0)
    # |len difference| = 7 exceeds the band half-width 2 in every path
    assert compiled.dtw_sqcost(x, y, 2) == np.inf
    assert _warp_py.dtw_sqcost(x, y, 2) == np.inf


@pytest.mark.parametrize("gamma", [0.1, 1.0, 10.0])
def test_sdtw_backends_agree(gamma):
    for x, y in _pairs(trials=30):
        a = compiled.sdtw_value(x, y, gamma)
        b = _warp_py.sdtw_value(x, y, gamma)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)


def test_active_backend_is_exported():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.dtw_sqcost is not None


def test_env_var_forces_python_backend():
    code = ("import spendcycles.kernels as k; print(k.BACKEND)")
    env = dict(os.environ, SPENDCYCLES_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_dispatch_functions_match_backend():
    if kernels.BACKEND == "compiled":
        assert kernels.dtw_sqcost is compiled.dtw_sqcost
    else:
        assert kernels.dtw_sqcost is _warp_py.dtw_sqcost
