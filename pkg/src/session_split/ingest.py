"""
Daily bar and corporate event ingestion.

Parses the common daily-download CSV layout into a :class:`PriceSeries`,
validates it, optionally back-adjusts raw prices for splits, and fetches the
raw documents over HTTP.

Prices are assumed to be split-adjusted by the data source already;
:func:`back_adjust_splits` exists for raw feeds and is only applied on request.
The ``Adj Close`` column is read for layout checking but never used, since the
return decomposition needs the cash dividend rather than an adjusted close.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time as dtime, timedelta, timezone
from typing import Optional

import numpy as np

from .exceptions import (
    DuplicateEventError,
    EmptySeriesError,
    FetchError,
    FetchTimeout,
    FormatError,
    OfflineError,
    RowError,
)

logger = logging.getLogger(__name__)

PRICE_HEADER = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"]
DIVIDEND_HEADER = ["Date", "Dividends"]
SPLIT_HEADER = ["Date", "Stock Splits"]

OFFLINE_ENV = "SESSION_SPLIT_OFFLINE"

# Yahoo-style download endpoint; {events} is one of history/div/split.
DEFAULT_ENDPOINT_TEMPLATE = (
    "https://query1.finance.yahoo.com/v7/finance/download/{symbol}"
    "?period1={period1}&period2={period2}&interval=1d&events={events}"
    "&includeAdjustedClose=true"
)


@dataclass(frozen=True)
class DailyBar:
    date: date
    open: float
    close: float
    high: Optional[float] = None
    low: Optional[float] = None
    volume: Optional[int] = None


@dataclass(frozen=True)
class CorporateEvent:
    date: date
    dividend: float = 0.0
    split_factor: float = 1.0


@dataclass(frozen=True)
class PriceSeries:
    instrument_id: str
    bars: tuple[DailyBar, ...]
    events: tuple[CorporateEvent, ...] = ()
    currency: str = "USD"

    def __len__(self):
        return len(self.bars)

    @property
    def dates(self) -> list[date]:
        return [b.date for b in self.bars]

    def to_array(self) -> np.ndarray:
        """Return an ``(n, 3)`` array of ``[open, close, dividend]`` per bar.

        Dividends are matched to bars by exact date; dividends dated on a
        non-trading day have no bar to land on and are not represented.
        """
        divs = {e.date: e.dividend for e in self.events}
        return np.array(
            [[b.open, b.close, divs.get(b.date, 0.0)] for b in self.bars], dtype=float
        ).reshape(-1, 3)

    def with_events(self, events) -> PriceSeries:
        return replace(self, events=tuple(events))

    def between(self, start: Optional[date] = None, end: Optional[date] = None) -> PriceSeries:
        """Restrict bars and events to the inclusive range ``[start, end]``."""

        def keep(d):
            return (start is None or d >= start) and (end is None or d <= end)

        return replace(
            self,
            bars=tuple(b for b in self.bars if keep(b.date)),
            events=tuple(e for e in self.events if keep(e.date)),
        )


@dataclass(frozen=True)
class Violation:
    date: Optional[date]
    rule: str
    message: str = ""


# Rules that make a series unusable for decomposition; the rest are advisory.
FATAL_RULES = frozenset(
    {"bar-order", "bar-positive", "event-order", "event-after-last-bar", "event-values"}
)


@dataclass
class FetchedDocuments:
    prices: bytes
    dividends: bytes
    splits: bytes
    retrieved_at: datetime
    urls: dict = field(default_factory=dict)


def _parse_date(text, line):
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise RowError(line, f"unparseable date {text!r}") from None


def _parse_float(text, line, name):
    try:
        value = float(text)
    except ValueError:
        raise RowError(line, f"unparseable {name} {text!r}") from None
    if not math.isfinite(value):
        raise RowError(line, f"non-finite {name} {text!r}")
    return value


def _parse_optional_float(text, line, name):
    text = text.strip()
    if text in ("", "null"):
        return None
    return _parse_float(text, line, name)


def _parse_volume(text, line):
    text = text.strip()
    if text in ("", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        value = _parse_float(text, line, "volume")
        if value != int(value):
            raise RowError(line, f"non-integer volume {text!r}") from None
        return int(value)


def _check_header(lines, expected, kind):
    if not lines or [c.strip() for c in lines[0]] != expected:
        got = ",".join(lines[0]) if lines else "<empty document>"
        raise FormatError(f"{kind}: expected header {','.join(expected)!r}, got {got!r}")


def _rows(text):
    return list(csv.reader(io.StringIO(text.lstrip("﻿"))))


def parse_price_csv(text: str, instrument_id: str = "", currency: str = "USD"):
    """Parse a daily price CSV document.

    Rows whose Open or Close is ``null``, empty, or not strictly positive are
    skipped. A zero open is a common missing-value sentinel in old index data
    and would otherwise fabricate a -100% intraday return.

    Args:
        text: CSV document with header ``Date,Open,High,Low,Close,Adj Close,Volume``.
        instrument_id: Symbol stored on the returned series.
        currency: ISO currency code stored on the returned series.

    Returns:
        ``(series, skipped)``: the bars sorted by date, and the number of rows skipped.

    Raises:
        FormatError: The header does not match.
        RowError: A date or number on a kept row cannot be parsed.
        EmptySeriesError: No usable rows remain.
    """
    lines = _rows(text)
    _check_header(lines, PRICE_HEADER, "price CSV")
    bars = []
    skipped = 0
    for lineno, row in enumerate(lines[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(PRICE_HEADER):
            raise RowError(lineno, f"expected {len(PRICE_HEADER)} fields, got {len(row)}")
        d, o, h, lo, c, _adj, v = (x.strip() for x in row)
        if o in ("", "null") or c in ("", "null"):
            skipped += 1
            continue
        open_ = _parse_float(o, lineno, "open")
        close = _parse_float(c, lineno, "close")
        if open_ <= 0 or close <= 0:
            skipped += 1
            continue
        bars.append(
            DailyBar(
                date=_parse_date(d, lineno),
                open=open_,
                close=close,
                high=_parse_optional_float(h, lineno, "high"),
                low=_parse_optional_float(lo, lineno, "low"),
                volume=_parse_volume(v, lineno),
            )
        )
    if skipped:
        logger.warning("%s: skipped %d price rows with missing or non-positive open/close",
                       instrument_id or "price CSV", skipped)
    if not bars:
        raise EmptySeriesError(f"{instrument_id or 'price CSV'}: no usable rows")
    bars.sort(key=lambda b: b.date)
    return PriceSeries(instrument_id=instrument_id, bars=tuple(bars), currency=currency), skipped


def _fmt(x):
    return "null" if x is None else repr(float(x))


def serialize_price_csv(series: PriceSeries) -> str:
    """Write ``series`` back in the download layout; close doubles as Adj Close."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(PRICE_HEADER)
    for b in series.bars:
        w.writerow([
            b.date.isoformat(), _fmt(b.open), _fmt(b.high), _fmt(b.low), _fmt(b.close),
            _fmt(b.close), "null" if b.volume is None else str(b.volume),
        ])
    return out.getvalue()


def _parse_ratio(text, line):
    text = text.strip()
    for sep in (":", "/"):
        if sep in text:
            num, den = text.split(sep, 1)
            a = _parse_float(num, line, "split numerator")
            b = _parse_float(den, line, "split denominator")
            if a <= 0 or b <= 0:
                raise RowError(line, f"split ratio {text!r} must have positive parts")
            return a / b
    value = _parse_float(text, line, "split ratio")
    if value <= 0:
        raise RowError(line, f"split ratio {text!r} must be positive")
    return value


def _read_event_file(text, header, kind, parse_value):
    if text is None or not text.strip():
        return {}
    lines = _rows(text)
    _check_header(lines, header, kind)
    values = {}
    for lineno, row in enumerate(lines[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise RowError(lineno, f"expected 2 fields, got {len(row)}")
        d = _parse_date(row[0], lineno)
        if d in values:
            raise DuplicateEventError(f"{kind}: duplicate date {d.isoformat()} (line {lineno})")
        values[d] = parse_value(row[1], lineno)
    return values


def _parse_dividend(text, line):
    value = _parse_float(text.strip(), line, "dividend")
    if value < 0:
        raise RowError(line, f"negative dividend {text!r}")
    return value


def parse_events_csv(dividends_text: Optional[str], splits_text: Optional[str]) -> list[CorporateEvent]:
    """Merge the dividend and split documents into one event per date.

    Either document may be ``None`` or empty. Split ratios are written
    ``A:B`` (``A/B`` is also accepted) and give ``split_factor = A / B``.
    """
    divs = _read_event_file(dividends_text, DIVIDEND_HEADER, "dividends CSV", _parse_dividend)
    splits = _read_event_file(splits_text, SPLIT_HEADER, "splits CSV", _parse_ratio)
    return [
        CorporateEvent(date=d, dividend=divs.get(d, 0.0), split_factor=splits.get(d, 1.0))
        for d in sorted(set(divs) | set(splits))
    ]


def validate_series(series: PriceSeries) -> list[Violation]:
    """Check every bar and series invariant; return the violations found.

    An empty list means the series is well formed. Violations are data, so
    nothing is raised here.
    """
    out = []
    prev = None
    for b in series.bars:
        if prev is not None and b.date <= prev:
            out.append(Violation(b.date, "bar-order", f"date not after {prev.isoformat()}"))
        prev = b.date
        if not (b.open > 0 and b.close > 0):
            out.append(Violation(b.date, "bar-positive", f"open={b.open} close={b.close}"))
            continue
        if b.low is not None and b.low > min(b.open, b.close):
            out.append(Violation(b.date, "bar-range", f"low {b.low} above min(open, close)"))
        if b.high is not None and b.high < max(b.open, b.close):
            out.append(Violation(b.date, "bar-range", f"high {b.high} below max(open, close)"))
        if b.volume is not None and b.volume < 0:
            out.append(Violation(b.date, "bar-volume", f"negative volume {b.volume}"))

    prev = None
    last_bar = series.bars[-1].date if series.bars else None
    for e in series.events:
        if prev is not None and e.date <= prev:
            out.append(Violation(e.date, "event-order", f"date not after {prev.isoformat()}"))
        prev = e.date
        if not (e.dividend >= 0 and e.split_factor > 0):
            out.append(Violation(e.date, "event-values",
                                 f"dividend={e.dividend} split_factor={e.split_factor}"))
        if last_bar is None or e.date > last_bar:
            out.append(Violation(e.date, "event-after-last-bar"))
    return out


def back_adjust_splits(series: PriceSeries) -> PriceSeries:
    """Divide pre-split prices and dividends by the product of later split factors.

    Every bar (and dividend) dated strictly before a split is divided by the
    cumulative factor of all splits after it. The returned series carries
    split factors of 1, so applying the adjustment again is a no-op.
    """
    splits = [(e.date, e.split_factor) for e in series.events if e.split_factor != 1.0]
    if not splits:
        return series

    def factor(d):
        f = 1.0
        for sd, sf in splits:
            if d < sd:
                f *= sf
        return f

    def scale(x, f):
        return None if x is None else x / f

    bars = []
    for b in series.bars:
        f = factor(b.date)
        if f == 1.0:
            bars.append(b)
        else:
            bars.append(replace(b, open=b.open / f, close=b.close / f,
                                high=scale(b.high, f), low=scale(b.low, f)))
    events = [replace(e, dividend=e.dividend / factor(e.date), split_factor=1.0)
              for e in series.events]
    return replace(series, bars=tuple(bars), events=tuple(events))


def offline_requested() -> bool:
    return os.environ.get(OFFLINE_ENV, "").strip() not in ("", "0")


def _epoch(d: date) -> int:
    return int(datetime.combine(d, dtime(0), tzinfo=timezone.utc).timestamp())


def _get(url, timeout):
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            status = resp.status
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(exc.code, url) from None
    except TimeoutError:
        raise FetchTimeout(f"timed out after {timeout}s: {url}") from None
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, TimeoutError):
            raise FetchTimeout(f"timed out after {timeout}s: {url}") from None
        raise FetchError(None, f"{url}: {exc.reason}") from None
    if not 200 <= status < 300:
        raise FetchError(status, url)
    return body


def fetch_history(
    instrument_id: str,
    start: date,
    end: date,
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE,
    timeout: float = 30.0,
    offline: bool = False,
) -> FetchedDocuments:
    """Download the raw price, dividend and split documents for one symbol.

    The template is formatted with ``symbol`` (URL-quoted), ``period1`` and
    ``period2`` (epoch seconds bounding the inclusive date range) and
    ``events`` (``history``, ``div`` or ``split``). Bodies are returned
    untouched so they can be stored byte for byte.

    Raises:
        OfflineError: ``offline`` is set or ``SESSION_SPLIT_OFFLINE=1``.
        FetchError: The server answered with a non-success status.
        FetchTimeout: A request exceeded ``timeout`` seconds.
    """
    if offline or offline_requested():
        raise OfflineError()
    params = dict(
        symbol=urllib.parse.quote(instrument_id, safe=""),
        period1=_epoch(start),
        period2=_epoch(end + timedelta(days=1)),
    )
    urls = {kind: endpoint_template.format(events=ev, **params)
            for kind, ev in (("prices", "history"), ("dividends", "div"), ("splits", "split"))}
    bodies = {}
    for kind, url in urls.items():
        logger.info("fetching %s %s", instrument_id, kind)
        t0 = time.monotonic()
        bodies[kind] = _get(url, timeout)
        logger.debug("%s %s: %d bytes in %.2fs", instrument_id, kind,
                     len(bodies[kind]), time.monotonic() - t0)
    return FetchedDocuments(retrieved_at=datetime.now(timezone.utc), urls=urls, **bodies)
