"""The ten pairwise dissimilarity measures.

All functions take 1-D series and return a scalar.  Every measure except
soft-DTW is symmetric, non-negative and zero on identical inputs; soft-DTW
can go negative and has a nonzero diagonal (see :mod:`.matrix` for how that
is flagged).  Degenerate inputs (constant series where a correlation is
needed, all-zero series where a norm is needed) raise
:class:`DegenerateSeriesError` instead of being mapped to sentinel values.
"""

import numpy as np

from .. import kernels
from ..errors import ConfigError, DegenerateSeriesError, ShapeError

_EPS_LOG = 1e-12  # floor for log-periodogram ordinates


def _as_series(x, min_len=1, name="series"):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.shape[0] < min_len:
        raise ShapeError(f"{name} needs at least {min_len} points, got {arr.shape[0]}")
    return arr


def _pair(x, y, min_len=1, equal_len=False):
    x = _as_series(x, min_len, "x")
    y = _as_series(y, min_len, "y")
    if equal_len and x.shape[0] != y.shape[0]:
        raise ShapeError(f"series lengths differ: {x.shape[0]} vs {y.shape[0]}")
    return x, y


def eucl(x, y):
    """Euclidean distance sqrt(sum((x_i - y_i)^2)) between equal-length series."""
    x, y = _pair(x, y, equal_len=True)
    return float(np.sqrt(np.sum((x - y) ** 2)))


def dtw(x, y, window=0):
    """Dynamic time warping distance.

    Square root of the minimal accumulated squared local cost over monotone
    boundary-to-boundary warping paths (match/insert/delete steps), so the
    value is commensurate with :func:`eucl` and never exceeds it on
    equal-length pairs.  ``window > 0`` restricts paths to the Sakoe-Chiba
    band |i - j| <= window; the band must be wide enough to admit a path.
    """
    x, y = _pair(x, y)
    if window < 0:
        raise ConfigError("window must be >= 0")
    if window > 0 and window < abs(x.shape[0] - y.shape[0]):
        raise ConfigError(
            f"window {window} admits no path for lengths {x.shape[0]} and {y.shape[0]}")
    return float(np.sqrt(kernels.dtw_sqcost(x, y, window)))


def sdtw(x, y, gamma=1.0):
    """Soft-DTW value with soft-min temperature ``gamma`` (> 0).

    Same recurrence as :func:`dtw` with squared local cost, min replaced by
    -gamma*log(sum exp(-a_i/gamma)), and no final square root.  Not a metric:
    sdtw(x, x) <= 0 and values may be negative.
    """
    x, y = _pair(x, y)
    if gamma <= 0:
        raise ConfigError("gamma must be > 0")
    return float(kernels.sdtw_value(x, y, gamma))


def sbd(x, y):
    """Shape-based distance: 1 - max normalized cross-correlation over shifts.

    The cross-correlation is taken over all integer shifts with zero padding
    and normalised by ||x||*||y||, so the result lies in [0, 2].
    """
    x, y = _pair(x, y)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateSeriesError("sbd needs a nonzero element in each series")
    cc = np.correlate(x, y, mode="full")
    return float(1.0 - cc.max() / (nx * ny))


def standardized(x):
    """Center and scale to unit norm; the building block of cor_dist."""
    x = _as_series(x, min_len=2)
    xc = x - x.mean()
    sx = np.sqrt(np.sum(xc ** 2))
    if sx == 0.0:
        raise DegenerateSeriesError("zero sample variance")
    return xc / sx

def cor_dist(x, y):
    """Correlation distance sqrt(2*(1 - rho)) with rho the Pearson coefficient.

    Computed as the Euclidean distance between the unit-normalized centered
    series (algebraically identical, exact at rho = 1), so it lies in [0, 2].
    """
    x, y = _pair(x, y, min_len=2, equal_len=True)
    return float(np.sqrt(np.sum((standardized(x) - standardized(y)) ** 2)))


def default_lags(n):
    """Default autocorrelation truncation: min(n // 4, 25), at least 1."""
    return max(1, min(n // 4, 25))


def acf_features(x, lags, partial=False):
    """Biased sample autocorrelations rho(1..lags); partial ones when asked.

    Partial autocorrelations come from the Durbin-Levinson recursion applied
    to the sample ACF.
    """
    x = _as_series(x)
    n = x.shape[0]
    if not 1 <= lags < n:
        raise ShapeError(f"need len > lags >= 1, got len {n}, lags {lags}")
    xc = x - x.mean()
    denom = float(np.sum(xc ** 2))
    if denom == 0.0:
        raise DegenerateSeriesError("autocorrelation of a constant series is undefined")
    rho = np.empty(lags)
    for l in range(1, lags + 1):
        rho[l - 1] = np.sum(xc[:-l] * xc[l:]) / denom
    if not partial:
        return rho
    # Durbin-Levinson: phi[k,k] is the partial autocorrelation at lag k
    pacf = np.empty(lags)
    phi_prev = np.zeros(lags + 1)
    pacf[0] = phi_prev[1] = rho[0]
    for k in range(2, lags + 1):
        num = rho[k - 1] - np.sum(phi_prev[1:k] * rho[k - 2::-1])
        den = 1.0 - np.sum(phi_prev[1:k] * rho[: k - 1])
        phi_kk = num / den if den != 0.0 else 0.0
        phi = phi_prev.copy()
        phi[k] = phi_kk
        phi[1:k] = phi_prev[1:k] - phi_kk * phi_prev[k - 1:0:-1]
        pacf[k - 1] = phi_kk
        phi_prev = phi
    return pacf


def acf_dist(x, y, lags=None, partial=False):
    """L2 distance between (partial) autocorrelation vectors at lags 1..L."""
    x, y = _pair(x, y, min_len=2)
    if lags is None:
        lags = default_lags(min(x.shape[0], y.shape[0]))
    fx = acf_features(x, lags, partial)
    fy = acf_features(y, lags, partial)
    return float(np.sqrt(np.sum((fx - fy) ** 2)))


def periodogram(x):
    """Periodogram of a mean-centered series at the Fourier frequencies.

    Returns ``(freqs, intens)`` with freqs[k-1] = 2*pi*k/n and
    intens[k-1] = |sum_t x_t e^{-i 2*pi*k*t/n}|^2 / n for k = 1..n//2;
    frequency zero is excluded (centering removes it anyway).
    """
    x = _as_series(x, min_len=4)
    n = x.shape[0]
    spec = np.fft.rfft(x - x.mean())
    k = np.arange(1, n // 2 + 1)
    intens = np.abs(spec[1:n // 2 + 1]) ** 2 / n
    return 2.0 * np.pi * k / n, intens


def _norm_periodogram(x, who):
    _, intens = periodogram(x)
    total = intens.sum()
    if total <= 0.0:
        raise DegenerateSeriesError(f"{who}: zero total periodogram intensity")
    return intens / total


def per_dist(x, y):
    """Euclidean distance between normalized periodograms.

    Normalisation by total intensity makes the distance invariant to positive
    rescaling of either input.
    """
    x, y = _pair(x, y, min_len=4, equal_len=True)
    return float(np.sqrt(np.sum((_norm_periodogram(x, "x") - _norm_periodogram(y, "y")) ** 2)))


def intper_dist(x, y):
    """L1 distance between cumulative normalized periodograms (spectral CDFs)."""
    x, y = _pair(x, y, min_len=4, equal_len=True)
    fx = np.cumsum(_norm_periodogram(x, "x"))
    fy = np.cumsum(_norm_periodogram(y, "y"))
    return float(np.sum(np.abs(fx - fy)))


def _local_linear_smooth(lam, z, bandwidth):
    """Local-linear smooth of z over lam with an Epanechnikov kernel.

    ``bandwidth`` is a fraction of the frequency range.  Falls back to the
    kernel-weighted mean where the local design is degenerate.
    """
    h = bandwidth * (lam[-1] - lam[0])
    out = np.empty_like(z)
    for idx in range(lam.shape[0]):
        u = (lam - lam[idx]) / h
        w = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u ** 2), 0.0)
        t = lam - lam[idx]
        s0 = np.sum(w)
        s1 = np.sum(w * t)
        s2 = np.sum(w * t ** 2)
        det = s0 * s2 - s1 ** 2
        if det > 1e-300:
            out[idx] = np.sum(w * (s2 - t * s1) * z) / det
        else:
            out[idx] = np.sum(w * z) / s0
    return out


def _glk_one_sided(ix, iy, lam, bandwidth):
    z = np.log(np.maximum(ix, _EPS_LOG)) - np.log(np.maximum(iy, _EPS_LOG))
    mu = _local_linear_smooth(lam, z, bandwidth)
    r = z - mu
    # logaddexp(0, r) = log(1 + e^r) without overflow
    smoothed = np.sum(r - 2.0 * np.logaddexp(0.0, r))
    raw = np.sum(z - 2.0 * np.logaddexp(0.0, z))
    return abs(smoothed - raw)


def specglk_dist(x, y, bandwidth=0.1):
    """Generalized-likelihood-ratio divergence between two spectra.

    The log-periodogram ratio Z_k is smoothed by a local-linear fit with an
    Epanechnikov kernel of the given bandwidth (fraction of the frequency
    range, in (0, 0.5]); the statistic compares the likelihood term under the
    smoothed ratio against the raw one.  Symmetrized as the mean of the
    (x, y) and (y, x) computations.
    """
    x, y = _pair(x, y, min_len=4, equal_len=True)
    if not 0.0 < bandwidth <= 0.5:
        raise ConfigError("bandwidth must lie in (0, 0.5]")
    lam, ix = periodogram(x)
    _, iy = periodogram(y)
    return 0.5 * (_glk_one_sided(ix, iy, lam, bandwidth)
                  + _glk_one_sided(iy, ix, lam, bandwidth))
