"""Daily resampling, higher-moment feature engineering, normalization, splits.

The paper-replication schema is 37 columns: 9 base features (daily market
open/high/low/close/volume plus 4 epidemiological counts), 27 engineered
moment features (each base times {mean, skewness, kurtosis}; market moments
over the intraday minute stream, epidemiological moments over a trailing
window), and one target column (next-day close).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np

from . import stats
from .errors import (
    ColumnMismatch,
    CoverageMismatch,
    InsufficientSamples,
    TooFewRows,
    WindowTooSmall,
    ZeroVariance,
    ZeroVarianceColumn,
)
from .ingest import AlignedRaw, DailyEpiRecord

log = logging.getLogger(__name__)

MARKET_STREAMS = ("open", "high", "low", "close", "volume")
EPI_FIELDS = ("new_cases", "cumulative_cases", "new_deaths", "cumulative_deaths")
MOMENTS = ("mean", "skew", "kurt")
TARGET_NAME = "target_next_close"
DEFAULT_EPI_WINDOW = 7


@dataclass(frozen=True)
class DailyBarAggregate:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float
    # per-stream intraday (mean, skewness, excess kurtosis)
    intraday: dict[str, tuple[float, float, float]]


@dataclass
class FeatureFrame:
    dates: list[date]
    column_names: list[str]
    values: np.ndarray  # rows = days, cols = features
    target_name: str = TARGET_NAME

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.dates), len(self.column_names)):
            raise ColumnMismatch(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.column_names)} columns"
            )
        if not np.all(np.isfinite(self.values)):
            raise ColumnMismatch("feature matrix contains NaN or infinity")
        if self.target_name not in self.column_names:
            raise ColumnMismatch(f"target column {self.target_name!r} missing")

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    @property
    def predictor_names(self) -> list[str]:
        return [c for c in self.column_names if c != self.target_name]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    @property
    def target(self) -> np.ndarray:
        return self.column(self.target_name)

    def predictors(self) -> np.ndarray:
        idx = [i for i, c in enumerate(self.column_names) if c != self.target_name]
        return self.values[:, idx]

    def restrict_columns(self, names: Sequence[str]) -> "FeatureFrame":
        """Keep the named predictors (original order) plus the target column."""
        wanted = [c for c in self.column_names if c in set(names) and c != self.target_name]
        missing = set(names) - set(self.column_names)
        if missing:
            raise ColumnMismatch(f"unknown columns: {sorted(missing)}")
        cols = wanted + [self.target_name]
        idx = [self.column_names.index(c) for c in cols]
        return FeatureFrame(list(self.dates), cols, self.values[:, idx], self.target_name)

    def rows(self, start: int, stop: int) -> "FeatureFrame":
        return FeatureFrame(
            self.dates[start:stop], list(self.column_names),
            self.values[start:stop].copy(), self.target_name,
        )


def _tolerant_moments(xs: np.ndarray) -> tuple[float, float, float]:
    """(mean, skew, kurt) with degenerate cases mapped to 0.0."""
    m = float(np.mean(xs))
    try:
        sk = stats.sample_skewness(xs)
    except (InsufficientSamples, ZeroVariance):
        log.debug("degenerate skewness window (n=%d), using 0.0", xs.size)
        sk = 0.0
    try:
        ku = stats.excess_kurtosis(xs)
    except (InsufficientSamples, ZeroVariance):
        log.debug("degenerate kurtosis window (n=%d), using 0.0", xs.size)
        ku = 0.0
    return m, sk, ku


def resample_daily(aligned: AlignedRaw) -> list[DailyBarAggregate]:
    """One aggregate per day: OHLCV rollup plus intraday moment stats."""
    out: list[DailyBarAggregate] = []
    for rec in aligned.epi:
        bars = aligned.bars_by_day[rec.date]
        streams = {
            "open": np.array([b.open for b in bars]),
            "high": np.array([b.high for b in bars]),
            "low": np.array([b.low for b in bars]),
            "close": np.array([b.close for b in bars]),
            "volume": np.array([b.volume for b in bars]),
        }
        out.append(DailyBarAggregate(
            date=rec.date,
            open=bars[0].open,
            high=float(streams["high"].max()),
            low=float(streams["low"].min()),
            close=bars[-1].close,
            volume=float(streams["volume"].sum()),
            intraday={s: _tolerant_moments(v) for s, v in streams.items()},
        ))
    return out


def market_column_names() -> list[str]:
    names = [f"btc_{s}" for s in MARKET_STREAMS]
    for s in MARKET_STREAMS:
        for m in MOMENTS:
            names.append(f"btc_{s}_{m}")
    return names


def epi_column_names() -> list[str]:
    names = list(EPI_FIELDS)
    for f in EPI_FIELDS:
        for m in MOMENTS:
            names.append(f"{f}_{m}")
    return names


def engineer_features(
    daily: Sequence[DailyBarAggregate],
    epi: Sequence[DailyEpiRecord],
    epi_window: int = DEFAULT_EPI_WINDOW,
) -> FeatureFrame:
    """Build the supervised frame: 36 predictors + next-day-close target.

    Epidemiological moments use a trailing ``epi_window``-day window,
    expanding at the series start, with degenerate windows recorded as 0.0.
    The final day has no next-day target and is not part of the output; use
    :func:`latest_predictors` for inference on it.
    """
    if epi_window < 4:
        raise WindowTooSmall(f"epi_window must be >= 4, got {epi_window}")
    if len(daily) != len(epi) or any(d.date != e.date for d, e in zip(daily, epi)):
        raise CoverageMismatch("daily market and epidemiological series must cover the same days")
    if len(daily) < 2:
        raise CoverageMismatch("need at least 2 days to form a next-day target")

    columns = market_column_names() + epi_column_names() + [TARGET_NAME]
    epi_series = {f: np.array([getattr(r, f) for r in epi], dtype=float) for f in EPI_FIELDS}
    n = len(daily) - 1
    values = np.empty((n, len(columns)))
    for i in range(n):
        agg = daily[i]
        row: list[float] = [agg.open, agg.high, agg.low, agg.close, agg.volume]
        for s in MARKET_STREAMS:
            row.extend(agg.intraday[s])
        row.extend(getattr(epi[i], f) for f in EPI_FIELDS)
        lo = max(0, i - epi_window + 1)
        for f in EPI_FIELDS:
            row.extend(_tolerant_moments(epi_series[f][lo:i + 1]))
        row.append(daily[i + 1].close)
        values[i] = row
    return FeatureFrame([d.date for d in daily[:-1]], columns, values)


def latest_predictors(
    daily: Sequence[DailyBarAggregate],
    epi: Sequence[DailyEpiRecord],
    epi_window: int = DEFAULT_EPI_WINDOW,
) -> tuple[date, dict[str, float]]:
    """Predictor values for the final (unlabeled) day, for inference."""
    if epi_window < 4:
        raise WindowTooSmall(f"epi_window must be >= 4, got {epi_window}")
    agg = daily[-1]
    i = len(daily) - 1
    epi_series = {f: np.array([getattr(r, f) for r in epi], dtype=float) for f in EPI_FIELDS}
    row: list[float] = [agg.open, agg.high, agg.low, agg.close, agg.volume]
    for s in MARKET_STREAMS:
        row.extend(agg.intraday[s])
    row.extend(getattr(epi[i], f) for f in EPI_FIELDS)
    lo = max(0, i - epi_window + 1)
    for f in EPI_FIELDS:
        row.extend(_tolerant_moments(epi_series[f][lo:i + 1]))
    names = market_column_names() + epi_column_names()
    return agg.date, dict(zip(names, row))


@dataclass(frozen=True)
class Normalizer:
    column_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray

    def to_dict(self) -> dict:
        return {
            "columns": list(self.column_names),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(tuple(d["columns"]), np.array(d["means"]), np.array(d["stds"]))

    def params_for(self, name: str) -> tuple[float, float]:
        i = self.column_names.index(name)
        return float(self.means[i]), float(self.stds[i])


def fit_normalizer(frame: FeatureFrame, rows: range | slice | None = None) -> Normalizer:
    """Per-column mean and sample standard deviation over the given rows.

    Fit on the training split only; leakage of validation/test statistics
    is a bug.
    """
    if rows is None:
        rows = range(frame.n_rows)
    if isinstance(rows, slice):
        rows = range(*rows.indices(frame.n_rows))
    if len(rows) == 0:
        raise TooFewRows("cannot fit a normalizer on zero rows")
    sub = frame.values[list(rows)]
    means = sub.mean(axis=0)
    stds = sub.std(axis=0, ddof=1) if sub.shape[0] > 1 else np.zeros(sub.shape[1])
    for j, s in enumerate(stds):
        if s <= 0.0:
            raise ZeroVarianceColumn(frame.column_names[j])
    return Normalizer(tuple(frame.column_names), means, stds)


def apply_normalizer(normalizer: Normalizer, frame: FeatureFrame) -> FeatureFrame:
    if tuple(frame.column_names) != normalizer.column_names:
        raise ColumnMismatch("column names do not match the fitted normalizer")
    z = (frame.values - normalizer.means) / normalizer.stds
    return FeatureFrame(list(frame.dates), list(frame.column_names), z, frame.target_name)


def invert_normalizer(normalizer: Normalizer, frame: FeatureFrame) -> FeatureFrame:
    if tuple(frame.column_names) != normalizer.column_names:
        raise ColumnMismatch("column names do not match the fitted normalizer")
    x = frame.values * normalizer.stds + normalizer.means
    return FeatureFrame(list(frame.dates), list(frame.column_names), x, frame.target_name)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    validation_fraction: float = 0.1
    test_fraction: float = 0.2

    def __post_init__(self):
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise ValueError(f"all fractions must be positive: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1: {fracs}")


def split_chronological(frame: FeatureFrame, spec: SplitSpec = SplitSpec()):
    """Contiguous chronological blocks: train, then validation, then test."""
    n = frame.n_rows
    if n < 3:
        raise TooFewRows(f"need >= 3 rows to split, got {n}")
    n_train = math.floor(spec.train_fraction * n)
    n_val = math.floor(spec.validation_fraction * n)
    return (
        frame.rows(0, n_train),
        frame.rows(n_train, n_train + n_val),
        frame.rows(n_train + n_val, n),
    )


# --- persistence ----------------------------------------------------------

def save_frame(frame: FeatureFrame, csv_path, meta: dict | None = None) -> None:
    """Write the frame as CSV (date first, target last) plus a JSON sidecar."""
    from .report import atomic_write_text

    names = frame.predictor_names + [frame.target_name]
    idx = [frame.column_names.index(c) for c in names]
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date"] + names)
    for d, row in zip(frame.dates, frame.values[:, idx]):
        w.writerow([d.isoformat()] + [repr(float(x)) for x in row])
    atomic_write_text(csv_path, buf.getvalue())
    sidecar = {"schema": names, "target": frame.target_name}
    if meta:
        sidecar.update(meta)
    import pathlib

    atomic_write_text(pathlib.Path(csv_path).with_suffix(".json"),
                      json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_frame(csv_path) -> FeatureFrame:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "date":
            raise ColumnMismatch(f"expected 'date' first, got {header[0]!r}")
        names = header[1:]
        dates, rows = [], []
        for row in reader:
            dates.append(date.fromisoformat(row[0]))
            rows.append([float(x) for x in row[1:]])
    return FeatureFrame(dates, names, np.array(rows), names[-1])
