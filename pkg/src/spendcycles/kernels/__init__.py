"""Warping kernel dispatch.

The compiled Cython extension is preferred; the numpy fallback is selected
when the extension was not built, or when ``SPENDCYCLES_PURE=1`` is set in
the environment (useful for benchmarking the two side by side).
"""

import os

from . import _warp_py

try:
    from . import _warp as _compiled
except ImportError:  # extension not built for this interpreter
    _compiled = None

if _compiled is None or os.environ.get("SPENDCYCLES_PURE", "0") not in ("", "0"):
    _impl = _warp_py
    BACKEND = "python"
else:
    _impl = _compiled
    BACKEND = "compiled"

dtw_sqcost = _impl.dtw_sqcost
sdtw_value = _impl.sdtw_value

__all__ = ["BACKEND", "dtw_sqcost", "sdtw_value"]
