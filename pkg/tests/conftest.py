"""Shared fixtures: synthetic CSV builders and small feature frames."""

from __future__ import annotations

import csv
import io
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from exocast.features import FeatureFrame, TARGET_NAME

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
CONFIG_PATH = REPO_ROOT / "configs" / "default.toml"


def day_start_ms(d: date) -> int:
    return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp() * 1000)


def minute_csv(days: list[date], closes_per_day: dict[date, list[float]],
               volume=1.0) -> bytes:
    """Minute CSV (exchange column order) with one bar per listed close.

    ``volume`` is a scalar for every bar or a per-day dict.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ts", "open", "close", "high", "low", "volume"])
    for d in days:
        closes = closes_per_day[d]
        base = day_start_ms(d)
        vol = volume[d] if isinstance(volume, dict) else volume
        prev = closes[0]
        for k, c in enumerate(closes):
            o = prev
            hi = max(o, c) * 1.001
            lo = min(o, c) * 0.999
            w.writerow([base + k * 60_000, o, c, hi, lo, vol])
            prev = c
    return buf.getvalue().encode()


def epi_csv(records: list[tuple[date, str, int, int, int, int]]) -> bytes:
    """WHO-layout CSV from (date, country_code, new_c, cum_c, new_d, cum_d)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Date_reported", "Country_code", "Country", "WHO_region",
                "New_cases", "Cumulative_cases", "New_deaths", "Cumulative_deaths"])
    for d, code, nc, cc, nd, cd in records:
        w.writerow([d.isoformat(), code, code.title(), "EURO", nc, cc, nd, cd])
    return buf.getvalue().encode()


def simple_epi_series(days: list[date], new_cases: list[int],
                      new_deaths: list[int] | None = None) -> bytes:
    if new_deaths is None:
        new_deaths = [max(0, n // 20) for n in new_cases]
    rows = []
    cc = cd = 0
    for d, nc, nd in zip(days, new_cases, new_deaths):
        cc += nc
        cd += nd
        rows.append((d, "AA", nc, cc, nd, cd))
    return epi_csv(rows)


def make_frame(n_rows: int, n_predictors: int, seed: int = 0,
               start: date = date(2020, 1, 6)) -> FeatureFrame:
    """Random frame with named predictors and a random target column."""
    rng = np.random.default_rng(seed)
    names = [f"f{i}" for i in range(n_predictors)] + [TARGET_NAME]
    values = rng.normal(size=(n_rows, n_predictors + 1))
    dates = [start + timedelta(days=i) for i in range(n_rows)]
    return FeatureFrame(dates, names, values)


@pytest.fixture(scope="session")
def fixture_paths():
    minute = DATA_DIR / "btc_minute_2020.csv"
    epi = DATA_DIR / "who_daily_2020.csv"
    assert minute.exists() and epi.exists(), "shipped data fixture missing"
    return minute, epi
