"""Parsing, validation, optional fetching, and alignment of the raw inputs.

Two sources feed the pipeline: minute-level exchange candles (CSV with
header ``ts,open,close,high,low,volume``, millisecond UTC timestamps) and
daily epidemiological counts in the WHO global-data CSV layout. Day
boundaries are UTC midnight throughout.
"""

from __future__ import annotations

import csv
import io
import logging
import time as _time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import IO, Callable, Iterable, Sequence

from .errors import (
    DuplicateTimestamp,
    EmptyInput,
    EmptyRange,
    HttpError,
    MalformedRow,
    MissingDate,
    MissingEpiDay,
    MissingMarketDay,
    NegativeCount,
    NonMonotonicTimestamps,
    RateLimited,
    TruncatedRange,
)

log = logging.getLogger(__name__)

MINUTE_MS = 60_000
MINUTE_CSV_HEADER = ["ts", "open", "close", "high", "low", "volume"]
EPI_CSV_HEADER = [
    "Date_reported", "Country_code", "Country", "WHO_region",
    "New_cases", "Cumulative_cases", "New_deaths", "Cumulative_deaths",
]

BITFINEX_CANDLES_URL = "https://api-pub.bitfinex.com/v2/candles/trade:{granularity}:{symbol}/hist"
BITFINEX_PAGE_LIMIT = 10_000
WHO_GLOBAL_CSV_URL = "https://covid19.who.int/WHO-COVID-19-global-data.csv"


@dataclass(frozen=True)
class MinuteBar:
    ts: int  # unix epoch milliseconds, UTC, whole minute
    open: float
    high: float
    low: float
    close: float
    volume: float

    @property
    def day(self) -> date:
        return datetime.fromtimestamp(self.ts / 1000, tz=timezone.utc).date()


@dataclass(frozen=True)
class DailyEpiRecord:
    date: date
    new_cases: int
    cumulative_cases: int
    new_deaths: int
    cumulative_deaths: int


@dataclass(frozen=True)
class AlignedRaw:
    start_date: date
    end_date: date
    bars_by_day: dict[date, list[MinuteBar]]
    epi: list[DailyEpiRecord]

    @property
    def days(self) -> list[date]:
        return [r.date for r in self.epi]

    @property
    def bar_counts(self) -> dict[date, int]:
        return {d: len(bs) for d, bs in self.bars_by_day.items()}


def _text_lines(stream: IO[bytes] | bytes | str) -> Iterable[str]:
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    if isinstance(stream, str):
        return io.StringIO(stream)
    return io.TextIOWrapper(stream, encoding="utf-8")


def parse_minute_bars(stream: IO[bytes] | bytes | str, order_policy: str = "reject_unsorted") -> list[MinuteBar]:
    """Parse exchange-order minute candles (``ts,open,close,high,low,volume``).

    ``order_policy`` is ``reject_unsorted`` (out-of-order timestamps are an
    error) or ``sort`` (rows re-ordered by timestamp). Duplicate timestamps
    are always an error.
    """
    if order_policy not in ("reject_unsorted", "sort"):
        raise ValueError(f"unknown order policy: {order_policy!r}")
    reader = csv.reader(_text_lines(stream))
    bars: list[MinuteBar] = []
    header_seen = False
    for line_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if not header_seen and row[0].strip().lower() == "ts":
            if [c.strip().lower() for c in row] != MINUTE_CSV_HEADER:
                raise MalformedRow(line_no, f"unexpected header {row}")
            header_seen = True
            continue
        header_seen = True
        if len(row) != 6:
            raise MalformedRow(line_no, f"expected 6 fields, got {len(row)}")
        try:
            ts = int(row[0])
            o, c, h, l, v = (float(x) for x in row[1:])
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        if ts % MINUTE_MS != 0:
            raise MalformedRow(line_no, f"timestamp {ts} is not a whole minute")
        if v < 0:
            raise MalformedRow(line_no, f"negative volume {v}")
        if l > min(o, c) or h < max(o, c):
            raise MalformedRow(line_no, f"high/low inconsistent with open/close: {row}")
        bars.append(MinuteBar(ts=ts, open=o, high=h, low=l, close=c, volume=v))
    if not bars:
        raise EmptyInput("no candle rows")
    if order_policy == "sort":
        bars.sort(key=lambda b: b.ts)
    seen_prev = None
    for b in bars:
        if seen_prev is not None:
            if b.ts == seen_prev:
                raise DuplicateTimestamp(f"duplicate timestamp {b.ts}")
            if b.ts < seen_prev:
                raise NonMonotonicTimestamps(f"timestamp {b.ts} after {seen_prev}")
        seen_prev = b.ts
    return bars


def serialize_minute_bars(bars: Sequence[MinuteBar]) -> str:
    """CSV text for a bar sequence; inverse of :func:`parse_minute_bars`."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(MINUTE_CSV_HEADER)
    for b in bars:
        w.writerow([b.ts, _fmt(b.open), _fmt(b.close), _fmt(b.high), _fmt(b.low), _fmt(b.volume)])
    return out.getvalue()


def _fmt(x: float) -> str:
    return repr(x)


def parse_epi_daily(stream: IO[bytes] | bytes | str, scope: str = "global_sum") -> list[DailyEpiRecord]:
    """Parse the WHO daily CSV into one record per date.

    ``scope`` is ``global_sum`` (sum counts over all countries per date) or
    a country code (keep only that country's rows).
    """
    reader = csv.reader(_text_lines(stream))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("empty epidemiological file") from None
    header = [h.strip().lstrip("﻿") for h in header]
    if header != EPI_CSV_HEADER:
        raise MalformedRow(1, f"unexpected header {header}")
    per_date: dict[date, list[int]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 8:
            raise MalformedRow(line_no, f"expected 8 fields, got {len(row)}")
        if scope != "global_sum" and row[1].strip() != scope:
            continue
        try:
            d = date.fromisoformat(row[0].strip())
            counts = [int(x) if x.strip() else 0 for x in row[4:]]
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        if any(c < 0 for c in counts):
            raise NegativeCount(f"negative count at line {line_no}: {row}")
        acc = per_date.setdefault(d, [0, 0, 0, 0])
        for i, c in enumerate(counts):
            acc[i] += c
    if not per_date:
        raise EmptyInput("no epidemiological rows" + ("" if scope == "global_sum" else f" for country {scope!r}"))
    days = sorted(per_date)
    for prev, cur in zip(days, days[1:]):
        if (cur - prev).days != 1:
            raise MissingDate(f"gap in date sequence between {prev} and {cur}")
    records = [
        DailyEpiRecord(d, per_date[d][0], per_date[d][1], per_date[d][2], per_date[d][3])
        for d in days
    ]
    for prev, cur in zip(records, records[1:]):
        if cur.cumulative_cases < prev.cumulative_cases:
            raise NegativeCount(
                f"cumulative cases decrease from {prev.date} ({prev.cumulative_cases}) "
                f"to {cur.date} ({cur.cumulative_cases})"
            )
        if cur.cumulative_deaths < prev.cumulative_deaths:
            raise NegativeCount(
                f"cumulative deaths decrease from {prev.date} ({prev.cumulative_deaths}) "
                f"to {cur.date} ({cur.cumulative_deaths})"
            )
    return records


def align_date_range(
    bars: Sequence[MinuteBar],
    epi: Sequence[DailyEpiRecord],
    start_date: date,
    end_date: date,
) -> AlignedRaw:
    """Restrict both sources to [start_date, end_date] and pair them per day.

    Every day in the inclusive range must have exactly one epidemiological
    record and at least one bar.
    """
    if end_date < start_date:
        raise EmptyRange(f"end {end_date} before start {start_date}")
    epi_by_day = {r.date: r for r in epi}
    bars_by_day: dict[date, list[MinuteBar]] = {}
    for b in bars:
        d = b.day
        if start_date <= d <= end_date:
            bars_by_day.setdefault(d, []).append(b)
    n_days = (end_date - start_date).days + 1
    epi_out: list[DailyEpiRecord] = []
    for i in range(n_days):
        d = start_date + timedelta(days=i)
        if d not in epi_by_day:
            raise MissingEpiDay(d)
        if d not in bars_by_day:
            raise MissingMarketDay(d)
        epi_out.append(epi_by_day[d])
    log.debug("aligned %d days, bar counts min=%d max=%d", n_days,
              min(len(v) for v in bars_by_day.values()),
              max(len(v) for v in bars_by_day.values()))
    return AlignedRaw(start_date, end_date, bars_by_day, epi_out)


# --- remote fetch ---------------------------------------------------------

@dataclass(frozen=True)
class CandlesSource:
    symbol: str = "tBTCUSD"
    granularity: str = "1m"
    start: int = 0  # epoch ms, inclusive
    end: int = 0    # epoch ms, inclusive


@dataclass(frozen=True)
class EpiCsvSource:
    url: str = WHO_GLOBAL_CSV_URL


HttpGet = Callable[[str, dict], "tuple[int, bytes]"]


def _default_http_get(url: str, params: dict) -> tuple[int, bytes]:
    import requests

    resp = requests.get(url, params=params, timeout=60)
    return resp.status_code, resp.content


def _with_backoff(call, max_attempts: int = 5, base_delay: float = 1.0, sleep=_time.sleep):
    for attempt in range(max_attempts):
        status, body = call()
        if status == 429:
            if attempt == max_attempts - 1:
                raise RateLimited(f"still rate limited after {max_attempts} attempts")
            sleep(base_delay * 2**attempt)
            continue
        if status != 200:
            raise HttpError(status)
        return body
    raise RateLimited()


def fetch_remote(
    source: CandlesSource | EpiCsvSource,
    sink: IO[bytes],
    http_get: HttpGet = _default_http_get,
    sleep=_time.sleep,
) -> int:
    """Download a raw source and write it to ``sink`` in the local CSV schema.

    Candle requests are paged at the provider limit and stitched without
    gaps or duplicates; 429 responses retry with capped exponential
    backoff. Returns the number of bytes written.
    """
    if isinstance(source, EpiCsvSource):
        body = _with_backoff(lambda: http_get(source.url, {}), sleep=sleep)
        sink.write(body)
        return len(body)

    url = BITFINEX_CANDLES_URL.format(granularity=source.granularity, symbol=source.symbol)
    written = 0
    header = (",".join(MINUTE_CSV_HEADER) + "\n").encode()
    sink.write(header)
    written += len(header)
    cursor = source.start
    last_ts = None
    while cursor <= source.end:
        params = {"start": cursor, "end": source.end, "limit": BITFINEX_PAGE_LIMIT, "sort": 1}
        body = _with_backoff(lambda: http_get(url, params), sleep=sleep)
        import json

        rows = json.loads(body)
        if not rows:
            break
        for mts, o, c, h, l, v in rows:
            if last_ts is not None and mts <= last_ts:
                continue  # provider page overlap
            line = f"{int(mts)},{o},{c},{h},{l},{v}\n".encode()
            sink.write(line)
            written += len(line)
            last_ts = int(mts)
        cursor = last_ts + MINUTE_MS
        if len(rows) < BITFINEX_PAGE_LIMIT:
            break
    if last_ts is None:
        raise TruncatedRange("provider returned no candles for the requested range")
    requested_days = (source.end - source.start) // 86_400_000 + 1
    got_days = (last_ts - source.start) // 86_400_000 + 1
    if got_days < requested_days:
        raise TruncatedRange(f"requested {requested_days} days, provider covered {got_days}")
    return written
