"""Pure-numpy warping kernels.

Fallback used when the compiled extension is unavailable.  The DP grids are
swept along anti-diagonals so each step is a vectorised numpy operation
instead of a Python-level cell loop.
"""

import numpy as np

_INF = np.inf


def _take(arr, idx):
    """arr[idx] with out-of-range positions mapped to +inf."""
    out = np.full(idx.shape[0], _INF)
    ok = (idx >= 0) & (idx < arr.shape[0])
    out[ok] = arr[idx[ok]]
    return out


def dtw_sqcost(x, y, window=0):
    """Accumulated squared-cost DTW total over the optimal warping path.

    Symmetric step pattern (match/insert/delete), boundary to boundary.
    ``window > 0`` keeps only cells with |i - j| <= window (Sakoe-Chiba).
    Returns +inf when the band admits no path.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = x.shape[0], y.shape[0]
    prev = prev2 = None
    cur = None
    for k in range(n + m - 1):
        lo = max(0, k - m + 1)
        i = np.arange(lo, min(n - 1, k) + 1)
        j = k - i
        c = (x[i] - y[j]) ** 2
        if k == 0:
            cur = c
        else:
            plo = max(0, k - m)          # lo of diagonal k-1
            pplo = max(0, k - m - 1)     # lo of diagonal k-2
            up = _take(prev, i - 1 - plo)
            left = _take(prev, i - plo)
            diag = _take(prev2, i - 1 - pplo) if prev2 is not None else np.full(i.shape[0], _INF)
            cur = c + np.minimum(np.minimum(up, left), diag)
        if window > 0:
            cur = np.where(np.abs(i - j) <= window, cur, _INF)
        prev2, prev = prev, cur
    return float(cur[0])


def sdtw_value(x, y, gamma):
    """Soft-DTW value: the DTW recurrence with min replaced by a smooth
    log-sum-exp soft-min of temperature ``gamma``; squared local cost, no
    final square root.  May be negative."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = x.shape[0], y.shape[0]
    prev = prev2 = None
    cur = None
    for k in range(n + m - 1):
        lo = max(0, k - m + 1)
        i = np.arange(lo, min(n - 1, k) + 1)
        j = k - i
        c = (x[i] - y[j]) ** 2
        if k == 0:
            cur = c
        else:
            plo = max(0, k - m)
            pplo = max(0, k - m - 1)
            up = _take(prev, i - 1 - plo)
            left = _take(prev, i - plo)
            diag = _take(prev2, i - 1 - pplo) if prev2 is not None else np.full(i.shape[0], _INF)
            # soft-min; for k >= 1 at least one of the three is finite
            base = np.minimum(np.minimum(up, left), diag)
            z = (np.exp(-(up - base) / gamma)
                 + np.exp(-(left - base) / gamma)
                 + np.exp(-(diag - base) / gamma))
            cur = c + base - gamma * np.log(z)
        prev2, prev = prev, cur
    return float(cur[0])
