"""ARIMA fitting by conditional sum of squares, AIC selection, forecasting.

Estimation differences the series d times, centers it on an intercept (kept
only when d=0), and minimizes the conditional sum of squares of the
innovations recursion with zero pre-sample values.  Nelder-Mead does the
minimizing from a Hannan-Rissanen start; trial parameters outside the
causal/invertible region pay a penalty proportional to the worst root
excess.  AIC uses the Gaussian CSS proxy, so scores compare within one run
only.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import ConfigError, DegenerateSeriesError, InputError, ShapeError


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ConfigError("orders must be non-negative")
        if self.p + self.q == 0 and self.d > 0:
            raise ConfigError("(0,d,0) without an intercept fits nothing")

    def __str__(self):
        return f"ARIMA({self.p},{self.d},{self.q})"


@dataclass
class ArimaFit:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    intercept: float  # None when d > 0
    sigma2: float
    aic: float
    loglik_proxy: float
    converged: bool


@dataclass
class Forecast:
    horizon: int
    values: np.ndarray
    origin_len: int


def difference(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("series must be one-dimensional")
    if d < 0 or d >= x.shape[0]:
        raise ShapeError(f"cannot difference length {x.shape[0]} series {d} times")
    for _ in range(d):
        x = np.diff(x)
    return x


def undifference(w, initials):
    """Invert difference(); initials holds each level's first value."""
    x = np.asarray(w, dtype=np.float64)
    for init in reversed(initials):
        x = np.concatenate(([init], x)).cumsum()
    return x


def difference_initials(x, d):
    x = np.asarray(x, dtype=np.float64)
    initials = []
    for _ in range(d):
        initials.append(x[0])
        x = np.diff(x)
    return initials


def _root_excess(coeffs, signs):
    """How far the largest inverse root sits outside the unit disc."""
    if coeffs.size == 0:
        return 0.0
    poly = np.concatenate(([1.0], signs * coeffs))
    roots = np.roots(poly)
    if roots.size == 0:
        return 0.0
    return max(0.0, float(np.abs(roots).max()) - 1.0)


def stability_excess(phi, theta):
    return max(_root_excess(np.asarray(phi, dtype=np.float64), -1.0),
               _root_excess(np.asarray(theta, dtype=np.float64), 1.0))


def css_residuals(w, p, q, mu, phi, theta):
    """Innovations for t = p..end with zero pre-sample innovations."""
    wc = np.asarray(w, dtype=np.float64) - mu
    n = wc.shape[0]
    z = wc[p:].copy()
    for i in range(1, p + 1):
        z -= phi[i - 1] * wc[p - i:n - i]
    if q:
        z = lfilter([1.0], np.concatenate(([1.0], theta)), z)
    return z


def _split_params(params, order):
    has_mu = order.d == 0
    mu = params[0] if has_mu else 0.0
    k = 1 if has_mu else 0
    phi = params[k:k + order.p]
    theta = params[k + order.p:k + order.p + order.q]
    return mu, phi, theta


def _hannan_rissanen(w, order):
    """Long-AR residual regression for starting values."""
    p, q = order.p, order.q
    mu0 = float(w.mean()) if order.d == 0 else 0.0
    wc = w - mu0
    n = wc.shape[0]
    if p + q == 0:
        return np.array([mu0]) if order.d == 0 else np.array([])
    ehat = np.zeros(n)
    L = min(max(10, 2 * (p + q)), max(1, n // 4))
    lag_cols = [wc[L - i:n - i] for i in range(1, L + 1)]
    design = np.column_stack(lag_cols)
    coef, *_ = np.linalg.lstsq(design, wc[L:], rcond=None)
    ehat[L:] = wc[L:] - design @ coef
    t0 = max(p, L + q)
    cols = [wc[t0 - i:n - i] for i in range(1, p + 1)]
    cols += [ehat[t0 - j:n - j] for j in range(1, q + 1)]
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, wc[t0:], rcond=None)
    phi, theta = coef[:p].copy(), coef[p:].copy()
    for _ in range(20):  # shrink toward zero until inside the stable region
        if stability_excess(phi, theta) == 0.0:
            break
        phi *= 0.5
        theta *= 0.5
    else:
        phi, theta = np.zeros(p), np.zeros(q)
    start = [mu0] if order.d == 0 else []
    return np.concatenate((start, phi, theta))


def fit_arima(x, order):
    """CSS fit of one (p,d,q) model; see module docstring for conventions."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 10 + order.p + order.q + order.d:
        raise InputError(
            f"need at least {10 + order.p + order.q + order.d} points for {order}")
    w = difference(x, order.d)
    if w.std() < 1e-12:
        raise DegenerateSeriesError(f"series is constant after {order.d} differencings")
    n_eff = w.shape[0] - order.p

    def objective(params):
        mu, phi, theta = _split_params(params, order)
        excess = stability_excess(phi, theta)
        e = css_residuals(w, order.p, order.q, mu, phi, theta)
        rss = float(e @ e)
        return rss + 1e6 * excess

    start = _hannan_rissanen(w, order)
    if start.size:
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"maxiter": 500, "xatol": 1e-8, "fatol": 1e-8})
        params, converged = res.x, bool(res.success)
    else:
        params, converged = start, True
    mu, phi, theta = _split_params(params, order)
    if stability_excess(phi, theta) > 0.0:
        converged = False
    e = css_residuals(w, order.p, order.q, mu, phi, theta)
    sigma2 = float(e @ e) / n_eff
    k = order.p + order.q + 1 + (1 if order.d == 0 else 0)
    aic = n_eff * np.log(sigma2) + 2 * k
    return ArimaFit(order=order, phi=np.asarray(phi), theta=np.asarray(theta),
                    intercept=float(mu) if order.d == 0 else None,
                    sigma2=sigma2, aic=float(aic),
                    loglik_proxy=-0.5 * n_eff * float(np.log(sigma2)),
                    converged=converged)


def order_grid(p_max=3, q_max=3, d_max=1):
    """All candidate orders, skipping the meaningless differenced null."""
    grid = []
    for d in range(d_max + 1):
        for p in range(p_max + 1):
            for q in range(q_max + 1):
                if p == 0 and q == 0 and d > 0:
                    continue
                grid.append(ArimaOrder(p, d, q))
    return grid


def select_arima(x, p_max=3, q_max=3, d_max=1):
    """Minimum-AIC fit over the order grid; ties to fewer parameters.

    Orders that fail to fit are collected; only if every order fails does
    the whole selection raise, listing each failure.
    """
    fits = []
    failures = []
    for order in order_grid(p_max, q_max, d_max):
        try:
            fits.append(fit_arima(x, order))
        except Exception as exc:
            failures.append(f"{order}: {exc}")
    if not fits:
        raise InputError("every order failed: " + "; ".join(failures))
    return min(fits, key=lambda f: (f.aic, f.order.p + f.order.q, f.order.p,
                                    f.order.q, f.order.d))


def forecast(fit, x, h):
    """Conditional-expectation forecasts h steps past the end of x."""
    if h < 1:
        raise ConfigError("horizon must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    order = fit.order
    w = difference(x, order.d)
    mu = fit.intercept if order.d == 0 else 0.0
    wc = (w - mu).tolist()
    e = np.zeros(w.shape[0])
    e[order.p:] = css_residuals(w, order.p, order.q, mu, fit.phi, fit.theta)
    e = e.tolist()
    for _ in range(h):
        ar = sum(fit.phi[i - 1] * wc[-i] for i in range(1, order.p + 1))
        ma = sum(fit.theta[j - 1] * e[-j] for j in range(1, order.q + 1))
        wc.append(ar + ma)
        e.append(0.0)
    fc = mu + np.asarray(wc[w.shape[0]:])
    # integrate back: each differencing level contributes its running tail
    tails = []
    lvl = x
    for _ in range(order.d):
        tails.append(lvl[-1])
        lvl = np.diff(lvl)
    for tail in reversed(tails):
        fc = tail + np.cumsum(fc)
    return Forecast(horizon=h, values=fc, origin_len=x.shape[0])


def write_forecast_csv(rows, path):
    """rows: list of (cluster, ArimaFit, Forecast), one line each."""
    h = max((fc.horizon for _, _, fc in rows), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster", "model", "aic"] + [f"pred_{i + 1}" for i in range(h)])
        for cluster, fit, fc in rows:
            w.writerow([int(cluster), str(fit.order), repr(fit.aic)]
                       + [repr(float(v)) for v in fc.values])
