"""Deterministic synthetic series shipped as ``seqcast/data/*.csv``.

Regenerate the bundled files with ``python -m seqcast.synthetic``.
"""

import csv
import datetime as dt
import os

import numpy as np

from .numkit import Rng


def business_days(start, n):
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def price_series(seed=2024, n=1800, s0=100.0, drift=3e-4, vol=0.015, momentum=0.05):
    """Geometric random walk whose log-returns are weakly AR(1)."""
    e = Rng(seed).normal(n)
    r = np.zeros(n)
    for t in range(1, n):
        r[t] = drift + momentum * (r[t - 1] - drift) + vol * e[t]
    return s0 * np.exp(np.cumsum(r))


def _simulate(step, seed, n, burn=200, order=1):
    e = Rng(seed).normal(n + burn)
    u = np.zeros(n + burn)
    for t in range(order, n + burn):
        u[t] = step(u[t - order:t][::-1], e[t])
    return u[burn:]


# Stationary level processes u_t; the bundled series is 100 + 10 * u_t.
AUTOCORRELATED = {
    "ar1_level": lambda u, e: 0.9 * u[0] + 0.45 * e,
    "setar": lambda u, e: (0.95 * u[0] + 0.08 if u[0] <= 0.0 else 0.3 * u[0]) + 0.25 * e,
    "expar": lambda u, e: (0.95 - 0.6 * np.exp(-u[0] ** 2)) * u[0] + 0.3 * e,
    "ar2_cycle": lambda u, e: 1.5 * u[0] - 0.8 * u[1] + 0.35 * e,
    "sine_map": lambda u, e: 1.2 * np.sin(2.0 * u[0]) + 0.2 * e,
}
_ORDERS = {"ar2_cycle": 2}


def autocorrelated_series(name, seed=11, n=700):
    return 100.0 + 10.0 * _simulate(AUTOCORRELATED[name], seed, n, order=_ORDERS.get(name, 1))


def write_yahoo_csv(path, values, start=dt.date(2000, 1, 3)):
    """Write ``values`` in the Yahoo export layout (all price columns equal)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"])
        for day, v in zip(business_days(start, len(values)), values):
            cell = f"{v:.6f}"
            w.writerow([day.isoformat(), cell, cell, cell, cell, cell, 0])


def write_bundled(directory):
    os.makedirs(directory, exist_ok=True)
    write_yahoo_csv(os.path.join(directory, "synthetic_price.csv"), price_series())
    for k, name in enumerate(AUTOCORRELATED):
        write_yahoo_csv(os.path.join(directory, f"{name}.csv"), autocorrelated_series(name, seed=11 + k))


if __name__ == "__main__":
    write_bundled(os.path.join(os.path.dirname(__file__), "data"))
