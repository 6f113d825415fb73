#!/usr/bin/env python3
"""Regenerate the shipped offline data fixture under data/.

The upstream sources (exchange candle API, WHO daily CSV) are network
services, so the repo ships a deterministic synthetic stand-in with the
same schemas, date range (2020-01-06 .. 2020-09-05), and qualitative
shape: a two-wave epidemic curve and a price path that dips in March and
recovers while tracking the cumulative-case trajectory with a 2-day lag.
The lagged coupling is what makes the exogenous arm of the ablation
genuinely informative.

Usage: python3 tools/generate_fixture.py [out_dir]
"""

from __future__ import annotations

import csv
import sys
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

START = date(2020, 1, 6)
END = date(2020, 9, 5)
BARS_PER_DAY = 96  # 15-minute spacing
SEED = 20200106

PRICE_COUPLING = -0.5  # log-price response to the normalized new-cases curve
PRICE_LAG_DAYS = 2
DRIFT_PER_DAY = 0.0008
NOISE_SIGMA = 0.008
NOISE_AR = 0.9


def _logistic(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def epidemic_curve(n_days: int, rng: np.random.Generator):
    """Daily new cases/deaths for a two-wave outbreak, plus cumulatives."""
    t = np.arange(n_days, dtype=float)
    wave1 = 200_000 * np.exp(-0.5 * ((t - 95) / 26.0) ** 2)
    wave2 = 265_000 * _logistic((t - 205) / 8.0)
    weekly = 1.0 + 0.12 * np.sin(2 * np.pi * t / 7.0)
    noise = rng.normal(1.0, 0.05, size=n_days)
    new_cases = np.maximum(0, (wave1 + wave2) * weekly * noise).astype(int)
    # deaths: scaled, lagged 10 days
    lagged = np.concatenate([np.zeros(10), new_cases[:-10].astype(float)])
    new_deaths = np.maximum(0, lagged * 0.035 * rng.normal(1.0, 0.06, size=n_days)).astype(int)
    return new_cases, np.cumsum(new_cases), new_deaths, np.cumsum(new_deaths)


def daily_closes(new_cases: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = new_cases.size
    t = np.arange(n, dtype=float)
    nc_norm = new_cases / new_cases.max()
    nc_lagged = np.concatenate([np.full(PRICE_LAG_DAYS, nc_norm[0]), nc_norm[:-PRICE_LAG_DAYS]])
    w = np.zeros(n)
    eps = rng.normal(0.0, NOISE_SIGMA, size=n)
    for i in range(1, n):
        w[i] = NOISE_AR * w[i - 1] + eps[i]
    log_p = np.log(8200.0) + DRIFT_PER_DAY * t + PRICE_COUPLING * nc_lagged + w
    return np.exp(log_p)


def write_minute_csv(path: Path, days: list[date], closes: np.ndarray,
                     rng: np.random.Generator) -> None:
    step_min = 1440 // BARS_PER_DAY
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ts", "open", "close", "high", "low", "volume"])
        prev_close = closes[0] * 0.998
        for d, day_close in zip(days, closes):
            day_start_ms = int(datetime(d.year, d.month, d.day,
                                        tzinfo=timezone.utc).timestamp() * 1000)
            # Brownian bridge in log space from prev_close to day_close
            total = np.log(day_close / prev_close)
            incr = rng.normal(0.0, 0.0025, size=BARS_PER_DAY)
            incr += (total - incr.sum()) / BARS_PER_DAY
            price = prev_close
            for k in range(BARS_PER_DAY):
                o = price
                c = price * np.exp(incr[k])
                hi = max(o, c) * (1.0 + abs(rng.normal(0, 0.0008)))
                lo = min(o, c) * (1.0 - abs(rng.normal(0, 0.0008)))
                vol = float(np.exp(rng.normal(3.0, 0.8)))
                ts = day_start_ms + k * step_min * 60_000
                w.writerow([ts, f"{o:.2f}", f"{c:.2f}", f"{hi:.2f}", f"{lo:.2f}", f"{vol:.4f}"])
                price = c
            prev_close = price


def write_epi_csv(path: Path, days: list[date], new_cases, cum_cases,
                  new_deaths, cum_deaths, rng: np.random.Generator) -> None:
    """Two synthetic jurisdictions whose sum matches the global curve."""
    frac = 0.6
    a_new_c = (new_cases * frac).astype(int)
    b_new_c = new_cases - a_new_c
    a_new_d = (new_deaths * frac).astype(int)
    b_new_d = new_deaths - a_new_d
    a_cum_c, b_cum_c = np.cumsum(a_new_c), np.cumsum(b_new_c)
    a_cum_d, b_cum_d = np.cumsum(a_new_d), np.cumsum(b_new_d)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Date_reported", "Country_code", "Country", "WHO_region",
                    "New_cases", "Cumulative_cases", "New_deaths", "Cumulative_deaths"])
        for i, d in enumerate(days):
            w.writerow([d.isoformat(), "AA", "Alpha", "EURO",
                        a_new_c[i], a_cum_c[i], a_new_d[i], a_cum_d[i]])
            w.writerow([d.isoformat(), "BB", "Beta", "AMRO",
                        b_new_c[i], b_cum_c[i], b_new_d[i], b_cum_d[i]])


def main(out_dir: str = "data") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_days = (END - START).days + 1
    days = [START + timedelta(days=i) for i in range(n_days)]
    rng = np.random.default_rng(SEED)
    new_c, cum_c, new_d, cum_d = epidemic_curve(n_days, rng)
    closes = daily_closes(new_c, rng)
    write_minute_csv(out / "btc_minute_2020.csv", days, closes, rng)
    write_epi_csv(out / "who_daily_2020.csv", days, new_c, cum_c, new_d, cum_d, rng)
    print(f"{n_days} days: close {closes[0]:.0f} -> {closes[-1]:.0f}, "
          f"cumulative cases {cum_c[-1]:,}")


if __name__ == "__main__":
    main(*sys.argv[1:])
