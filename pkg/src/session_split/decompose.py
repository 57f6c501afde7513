"""
Overnight / intraday return decomposition and wealth accumulation.

Day ``t`` is split into two legs:

* overnight: previous close to today's open, absorbing any dividend whose
  ex-date is today (reinvested at the open, taxes ignored);
* intraday: today's open to today's close.

The first day has no previous close, so its overnight return is undefined and
stored as NaN. Both wealth curves start at 1 ahead of the first date.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from datetime import date

import numpy as np

from .exceptions import DomainError, EmptySeriesError
from .ingest import PriceSeries

logger = logging.getLogger(__name__)


class DividendPolicy(enum.Enum):
    REINVEST = "reinvest"
    DROP = "drop"

    @classmethod
    def parse(cls, value) -> DividendPolicy:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown dividend policy {value!r}; use 'reinvest' or 'drop'") from None


@dataclass(frozen=True, eq=False)
class SessionReturnSeries:
    instrument_id: str
    dates: tuple[date, ...]
    overnight: np.ndarray
    intraday: np.ndarray
    policy: DividendPolicy

    def __len__(self):
        return len(self.dates)

    def common(self) -> tuple[np.ndarray, np.ndarray]:
        """Overnight and intraday returns on days where both are defined."""
        mask = ~np.isnan(self.overnight)
        return self.overnight[mask], self.intraday[mask]


@dataclass(frozen=True, eq=False)
class WealthCurve:
    dates: tuple[date, ...]
    values: np.ndarray
    label: str

    def __len__(self):
        return len(self.values)

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    @property
    def final(self) -> float:
        return float(self.values[-1])


def overnight_return(prev_close: float, open_: float, dividend: float = 0.0,
                     policy: DividendPolicy = DividendPolicy.REINVEST) -> float:
    """Close-to-next-open simple return, with the dividend added back under REINVEST."""
    if not (prev_close > 0 and open_ > 0):
        raise DomainError(f"prices must be positive (prev_close={prev_close}, open={open_})")
    if not dividend >= 0:
        raise DomainError(f"dividend must be non-negative, got {dividend}")
    if DividendPolicy.parse(policy) is DividendPolicy.REINVEST:
        return (open_ + dividend) / prev_close - 1.0
    return open_ / prev_close - 1.0


def intraday_return(open_: float, close: float) -> float:
    if not (open_ > 0 and close > 0):
        raise DomainError(f"prices must be positive (open={open_}, close={close})")
    return close / open_ - 1.0


def session_returns(ohlc: np.ndarray, policy: DividendPolicy = DividendPolicy.REINVEST):
    """Vectorised decomposition of an ``(n, 3)`` ``[open, close, dividend]`` array.

    Returns ``(overnight, intraday)`` arrays of length ``n``; ``overnight[0]`` is NaN.
    """
    ohlc = np.asarray(ohlc, dtype=float)
    if ohlc.ndim != 2 or ohlc.shape[1] != 3:
        raise DomainError(f"expected an (n, 3) array, got shape {ohlc.shape}")
    opens, closes, divs = ohlc.T
    if not (np.all(opens > 0) and np.all(closes > 0)):
        raise DomainError("prices must be positive")
    if not np.all(divs >= 0):
        raise DomainError("dividends must be non-negative")
    intraday = closes / opens - 1.0
    overnight = np.full(len(opens), np.nan)
    if DividendPolicy.parse(policy) is DividendPolicy.REINVEST:
        overnight[1:] = (opens[1:] + divs[1:]) / closes[:-1] - 1.0
    else:
        overnight[1:] = opens[1:] / closes[:-1] - 1.0
    return overnight, intraday


def decompose_series(series: PriceSeries,
                     policy: DividendPolicy = DividendPolicy.REINVEST) -> SessionReturnSeries:
    """Split a price series into per-day overnight and intraday returns.

    Any gap between bars (weekend, holiday, halt) counts as one overnight
    period. Dividends are matched to bars by exact ex-date.
    """
    if len(series.bars) < 2:
        raise EmptySeriesError(f"{series.instrument_id}: need at least 2 bars, got {len(series.bars)}")
    policy = DividendPolicy.parse(policy)
    bar_dates = set(series.dates)
    orphans = [e.date for e in series.events if e.dividend > 0 and e.date not in bar_dates]
    if orphans:
        logger.warning("%s: %d dividends dated on non-trading days are ignored (first %s)",
                       series.instrument_id, len(orphans), orphans[0].isoformat())
    overnight, intraday = session_returns(series.to_array(), policy)
    return SessionReturnSeries(
        instrument_id=series.instrument_id,
        dates=tuple(series.dates),
        overnight=overnight,
        intraday=intraday,
        policy=policy,
    )


def cumulative_wealth(returns, dates=None, label: str = "") -> WealthCurve:
    """Compound simple returns into a wealth path starting at 1.

    ``values[0] = 1`` and ``values[t + 1] = values[t] * (1 + returns[t])``,
    with NaN entries treated as a factor of 1, so the curve has one more
    point than ``returns``: ``values[t + 1]`` is the wealth after ``dates[t]``.
    """
    r = np.asarray(returns, dtype=float)
    defined = ~np.isnan(r)
    if np.any(r[defined] <= -1.0):
        raise DomainError("returns must be greater than -1")
    factors = np.where(defined, 1.0 + r, 1.0)
    values = np.concatenate(([1.0], np.cumprod(factors)))
    return WealthCurve(dates=tuple(dates) if dates is not None else (), values=values, label=label)


def wealth_curves(srs: SessionReturnSeries) -> tuple[WealthCurve, WealthCurve]:
    """Overnight and intraday wealth curves for a decomposed series.

    Both start at 1 before the first date. The intraday curve applies the
    first day's intraday return; the overnight curve's first factor lands on
    the second date.
    """
    return (
        cumulative_wealth(srs.overnight, srs.dates, "overnight"),
        cumulative_wealth(srs.intraday, srs.dates, "intraday"),
    )
