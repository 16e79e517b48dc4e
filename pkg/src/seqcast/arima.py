"""ARIMA(p, d, q) estimated by two-stage (Hannan-Rissanen) least squares.

An intercept is estimated only when ``d == 0``; integrated models carry no
drift, so ``(0, 1, 0)`` is the pure random walk.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np


class DegenerateFitError(ValueError):
    """The regression design is singular (e.g. a constant series)."""


class RollingForecastError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"rolling forecast failed at test index {index}: {cause}")
        self.index = index


@dataclass(frozen=True)
class ArimaOrder:
    p: int = 5
    d: int = 1
    q: int = 0

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("ARIMA orders must be non-negative")
        if self.p + self.q == 0 and self.d == 0:
            raise ValueError("degenerate order (0, 0, 0)")

    @classmethod
    def parse(cls, text):
        parts = [int(s) for s in str(text).replace(" ", "").strip("()").split(",")]
        if len(parts) != 3:
            raise ValueError(f"ARIMA order must be 'p,d,q', got {text!r}")
        return cls(*parts)

    def __str__(self):
        return f"{self.p},{self.d},{self.q}"


def difference(series, d):
    x = np.asarray(series, dtype=np.float64)
    if len(x) <= d:
        raise ValueError(f"series of length {len(x)} too short to difference {d} times")
    return np.diff(x, n=d) if d else x.copy()


def undifference(diffs, anchors, d):
    """Invert :func:`difference`.

    ``anchors`` are the first ``d`` values of the original series; the
    result is the continuation after them, so
    ``undifference(difference(s, d), s[:d], d) == s[d:]``.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    if len(anchors) != d:
        raise ValueError(f"need exactly {d} anchor values, got {len(anchors)}")
    if d == 0:
        return diffs.copy()
    lower = undifference(diffs, np.diff(anchors), d - 1)
    return anchors[-1] + np.cumsum(lower)


def _lagmat(x, lags, start):
    """Columns ``x[t-1], ..., x[t-lags]`` for rows ``t = start .. len(x)-1``."""
    return np.column_stack([x[start - j:len(x) - j] for j in range(1, lags + 1)]) if lags else \
        np.empty((len(x) - start, 0))


def _lstsq(A, b):
    if A.shape[1] == 0:
        return np.empty(0)
    if A.shape[0] < A.shape[1] or np.linalg.matrix_rank(A) < A.shape[1]:
        raise DegenerateFitError("singular regression design (constant or collinear series)")
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


def innovations(z, phi, theta, intercept):
    """Recursive one-step errors, pre-sample errors taken as zero."""
    p, q = len(phi), len(theta)
    e = np.zeros(len(z))
    for t in range(p, len(z)):
        ar = sum(phi[j] * z[t - 1 - j] for j in range(p))
        ma = sum(theta[k] * e[t - 1 - k] for k in range(q) if t - 1 - k >= 0)
        e[t] = z[t] - intercept - ar - ma
    return e


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    residuals: np.ndarray  # last max(q, 1) innovations
    z_tail: np.ndarray  # last p differenced values
    level_tail: np.ndarray  # last d raw values

    @classmethod
    def from_coefficients(cls, series, order, phi=(), theta=(), intercept=0.0):
        series = np.asarray(series, dtype=np.float64)
        phi, theta = np.asarray(phi, dtype=np.float64), np.asarray(theta, dtype=np.float64)
        if len(phi) != order.p or len(theta) != order.q:
            raise ValueError("coefficient counts do not match the order")
        z = difference(series, order.d)
        e = innovations(z, phi, theta, intercept)
        return cls(order, phi, theta, float(intercept),
                   e[len(e) - max(order.q, 1):], z[len(z) - order.p:] if order.p else z[:0],
                   series[len(series) - order.d:] if order.d else series[:0])

    def update(self, value):
        """Append one observation, keeping the coefficients fixed."""
        z_next = difference(np.append(self.level_tail, value), self.order.d)[-1] if self.order.d \
            else float(value)
        e_next = z_next - self._mean_forecast()
        p, d = self.order.p, self.order.d
        return ArimaModel(
            self.order, self.phi, self.theta, self.intercept,
            np.append(self.residuals, e_next)[1:],
            np.append(self.z_tail, z_next)[1:] if p else self.z_tail,
            np.append(self.level_tail, value)[1:] if d else self.level_tail,
        )

    def _mean_forecast(self):
        p, q = self.order.p, self.order.q
        ar = float(np.dot(self.phi, self.z_tail[::-1])) if p else 0.0
        ma = float(np.dot(self.theta, self.residuals[::-1][:q])) if q else 0.0
        return self.intercept + ar + ma


def _check_stationary(phi):
    if len(phi) == 0:
        return
    # roots of 1 - phi_1 z - ... - phi_p z^p
    roots = np.roots(np.r_[-phi[::-1], 1.0])
    if np.any(np.abs(roots) <= 1.0):
        warnings.warn("fitted AR polynomial has roots on or inside the unit circle",
                      RuntimeWarning, stacklevel=3)


def fit_arima(series, order=ArimaOrder()):
    series = np.asarray(series, dtype=np.float64)
    p, d, q = order.p, order.d, order.q
    z = difference(series, d)
    n = len(z)
    floor = 10 * (p + q + 1)
    if n < floor:
        raise ValueError(f"need at least {floor} differenced points for order ({order}), got {n}")
    with_const = d == 0
    if p + q > 0 and np.ptp(z) == 0.0:
        raise DegenerateFitError("series is constant after differencing")

    if q > 0:
        m = min(max(p + q + 1, int(math.ceil(10 * math.log10(n)))), n // 4)
        A = _lagmat(z, m, m)
        A = np.column_stack([np.ones(len(A)), A]) if with_const else A
        c = _lstsq(A, z[m:])
        e_hat = np.zeros(n)
        e_hat[m:] = z[m:] - A @ c
        start = m + q
    else:
        e_hat = None
        start = p
    cols = [_lagmat(z, p, start)]
    if q > 0:
        cols.append(_lagmat(e_hat, q, start))
    if with_const:
        cols.insert(0, np.ones((n - start, 1)))
    coef = _lstsq(np.column_stack(cols), z[start:])
    intercept = float(coef[0]) if with_const else 0.0
    rest = coef[1:] if with_const else coef
    phi, theta = rest[:p], rest[p:p + q]
    _check_stationary(phi)
    return ArimaModel.from_coefficients(series, order, phi, theta, intercept)


def forecast_one(model):
    """One-step conditional mean in original units."""
    z_hat = model._mean_forecast()
    d = model.order.d
    if d == 0:
        return z_hat
    return float(undifference([z_hat], model.level_tail, d)[0])


def rolling_forecast(train, test, order=ArimaOrder(), refit=True):
    """Expanding-window one-step forecasts over ``test``.

    With ``refit`` the model is re-estimated on all history before every
    step; otherwise the initial coefficients are kept and only the state is
    advanced.
    """
    history = list(np.asarray(train, dtype=np.float64))
    test = np.asarray(test, dtype=np.float64)
    preds = np.empty(len(test))
    model = None
    for k, actual in enumerate(test):
        try:
            if refit or model is None:
                model = fit_arima(history, order)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise RollingForecastError(k, exc) from exc
        preds[k] = forecast_one(model)
        history.append(float(actual))
        if not refit:
            model = model.update(float(actual))
    return preds
