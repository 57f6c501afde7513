"""
Geometric random-walk price series with separate overnight and intraday legs.

Used to calibrate the suspicion classifier: a zero-drift walk should almost
never be flagged, whatever its overnight/intraday variance split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import date, timedelta
from typing import Iterator

import numpy as np

from .decompose import DividendPolicy, decompose_series
from .exceptions import DomainError
from .ingest import DailyBar, PriceSeries
from .stats import SuspicionMetrics, Thresholds, classify_suspicion

logger = logging.getLogger(__name__)

SIM_START = date(2000, 1, 3)
_OVERNIGHT, _INTRADAY = 0, 1


@dataclass(frozen=True)
class GbmParams:
    n_days: int = 252
    start_price: float = 100.0
    mu_overnight: float = 0.0
    mu_intraday: float = 0.0
    sigma_overnight: float = 0.005
    sigma_intraday: float = 0.005 * np.sqrt(2.0)
    seed: int = 0

    def __post_init__(self):
        if int(self.n_days) < 2:
            raise DomainError(f"n_days must be at least 2, got {self.n_days}")
        if not self.start_price > 0:
            raise DomainError(f"start_price must be positive, got {self.start_price}")
        if self.sigma_overnight < 0 or self.sigma_intraday < 0:
            raise DomainError("sigmas must be non-negative")


def business_days(start: date, n: int) -> list[date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def _session_draws(seed: int, session: int, n: int) -> np.ndarray:
    # draw t of stream (seed, session) belongs to day t, independent of n
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, session]))
    return rng.standard_normal(n)


def simulate_log_returns(params: GbmParams) -> tuple[np.ndarray, np.ndarray]:
    """Overnight and intraday log returns; ``overnight[0]`` is unused (first open is the start price)."""
    n = int(params.n_days)
    g = params.mu_overnight + params.sigma_overnight * _session_draws(params.seed, _OVERNIGHT, n)
    h = params.mu_intraday + params.sigma_intraday * _session_draws(params.seed, _INTRADAY, n)
    g[0] = 0.0
    return g, h


def simulate_series(params: GbmParams, instrument_id: str = "SIM") -> PriceSeries:
    """Simulate daily bars: ``open_t = close_{t-1} * exp(g_t)``, ``close_t = open_t * exp(h_t)``."""
    g, h = simulate_log_returns(params)
    # cumulative log growth at each open and close, interleaved
    growth = np.exp(np.cumsum(np.column_stack([g, h]).ravel()))
    opens = params.start_price * growth[0::2]
    closes = params.start_price * growth[1::2]
    dates = business_days(SIM_START, int(params.n_days))
    bars = tuple(DailyBar(date=d, open=float(o), close=float(c))
                 for d, o, c in zip(dates, opens, closes))
    return PriceSeries(instrument_id=instrument_id, bars=bars)


def trial_seeds(seed: int, trials: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed) % 2**64, 0x5EED]).generate_state(trials, np.uint64)


def calibration_metrics(params: GbmParams, trials: int,
                        thresholds: Thresholds = Thresholds()) -> Iterator[SuspicionMetrics]:
    """Yield classifier metrics for ``trials`` independently seeded null series.

    Trial ``i`` simulates with seed ``trial_seeds(params.seed)[i]`` and runs the
    permutation test with the same seed, so trials can be evaluated in any order.
    """
    for i, s in enumerate(trial_seeds(params.seed, trials)):
        s = int(s)
        series = simulate_series(replace(params, seed=s), instrument_id=f"SIM{i}")
        srs = decompose_series(series, DividendPolicy.REINVEST)
        yield classify_suspicion(srs, replace(thresholds, seed=s))


def calibrate_false_positive_rate(params: GbmParams, trials: int = 1000,
                                  thresholds: Thresholds = Thresholds()) -> float:
    """Fraction of zero-drift null simulations that the classifier flags."""
    if params.mu_overnight != 0 or params.mu_intraday != 0:
        raise DomainError("calibration requires zero drifts")
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials}")
    flagged = sum(m.flagged for m in calibration_metrics(params, trials, thresholds))
    logger.info("null calibration: %d of %d trials flagged", flagged, trials)
    return flagged / trials
