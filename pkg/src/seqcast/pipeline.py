"""CSV ingestion, chronological split, min-max scaling and supervised framing."""

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

MIN_ROWS = 30
MISSING = {"", "null", "nan", "na", "n/a"}


class DataError(ValueError):
    """Raised for unreadable or unusable input series."""


@dataclass(frozen=True)
class SeriesFrame:
    name: str
    timestamps: tuple
    values: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise DataError("timestamps and values differ in length")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not a < b:
                raise DataError(f"timestamps not strictly increasing at {b}")

    def __len__(self):
        return len(self.values)

    def slice(self, start, stop=None):
        return SeriesFrame(self.name, self.timestamps[start:stop], self.values[start:stop])


def bundled_path(name):
    """Path of a CSV shipped in ``seqcast/data`` (``name`` without extension)."""
    path = resources.files("seqcast").joinpath("data").joinpath(f"{name}.csv")
    if not path.is_file():
        raise DataError(f"no bundled series named {name!r}")
    return str(path)


def bundled_names():
    return sorted(p.name[:-4] for p in resources.files("seqcast").joinpath("data").iterdir()
                  if p.name.endswith(".csv"))


def resolve_input(spec):
    """Accept a filesystem path or ``bundled:NAME``."""
    if spec.startswith("bundled:"):
        return bundled_path(spec.split(":", 1)[1])
    return spec


def load_series(path, column_name="Adj Close", date_column="Date", min_rows=MIN_ROWS, name=None):
    """Read one value column of a Yahoo-style CSV, sorted by date.

    Rows whose value is empty or ``null`` are skipped and counted in
    ``SeriesFrame.dropped``.
    """
    path = resolve_input(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (date_column, column_name):
            if col not in header:
                raise DataError(f"column {col!r} not found in {path} (have {header})")
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            raw = (row[column_name] or "").strip()
            if raw.lower() in MISSING:
                dropped += 1
                continue
            try:
                stamp = dt.date.fromisoformat(row[date_column].strip())
            except (ValueError, AttributeError):
                raise DataError(f"{path}:{lineno}: unparseable date {row[date_column]!r}") from None
            try:
                value = float(raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric {column_name} {raw!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite {column_name}")
            rows.append((stamp, value))
    if len(rows) < min_rows:
        raise DataError(f"{path}: only {len(rows)} usable rows, need at least {min_rows}")
    rows.sort(key=lambda r: r[0])
    if name is None:
        name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return SeriesFrame(name, tuple(r[0] for r in rows), np.array([r[1] for r in rows]), dropped)


def split_index(n, fraction):
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    # round first so that e.g. 0.7 * 10 is 7, not 6.999...
    return int(math.floor(round(n * fraction, 9)))


def split(series, fraction=0.70):
    """Chronological train/test split at ``floor(N * fraction)``."""
    k = split_index(len(series), fraction)
    if k == 0 or k == len(series):
        raise DataError(f"split of {len(series)} points at {fraction} leaves one side empty")
    if isinstance(series, SeriesFrame):
        return series.slice(0, k), series.slice(k)
    values = np.asarray(series, dtype=np.float64)
    return values[:k], values[k:]


@dataclass(frozen=True)
class ScalerStats:
    """Affine map of ``[min, max]`` onto ``[-1, 1]``."""

    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise DataError("degenerate series: training segment is constant")

    def transform(self, x):
        return 2.0 * (np.asarray(x, dtype=np.float64) - self.min) / (self.max - self.min) - 1.0

    def inverse(self, z):
        return (np.asarray(z, dtype=np.float64) + 1.0) * (self.max - self.min) / 2.0 + self.min


def scale_fit_transform(train, test):
    train = np.asarray(train, dtype=np.float64)
    stats = ScalerStats(float(train.min()), float(train.max()))
    return stats.transform(train), stats.transform(test), stats


@dataclass(frozen=True)
class SupervisedSet:
    X: np.ndarray  # (n, lookback)
    y: np.ndarray  # (n,)
    lookback: int = field(default=1)

    def __len__(self):
        return len(self.y)


def to_supervised(values, lookback=1):
    """Windows ``values[i:i+lookback]`` paired with target ``values[i+lookback]``."""
    values = np.asarray(values, dtype=np.float64)
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    n = len(values) - lookback
    if n < 1:
        raise DataError(f"series of length {len(values)} too short for lookback {lookback}")
    idx = np.arange(n)[:, None] + np.arange(lookback)[None, :]
    return SupervisedSet(values[idx], values[lookback:].copy(), lookback)
