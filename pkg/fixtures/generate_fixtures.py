"""Regenerate the frozen synthetic fixtures in this directory.

The CSV files are committed; tests treat them as frozen inputs. They are
synthetic (seeded random walks with chosen session drifts), not market data:

* SPX  - ~31 years of trading days, overnight drift up, intraday drift down,
         quarterly dividends, one `null` row and one zero-open row.
* NDX  - same pattern, no dividends.
* RW   - zero-drift random walk (should not be flagged).
* SPLT - short raw (unadjusted) series with a 4:1 split, for --raw-splits.

Run: python fixtures/generate_fixtures.py
"""

from datetime import date
from pathlib import Path

import numpy as np

from session_split.nullmodel import GbmParams, business_days, simulate_log_returns

HERE = Path(__file__).resolve().parent
HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"


def bars_from_logs(start_price, g, h):
    growth = np.exp(np.cumsum(np.column_stack([g, h]).ravel()))
    return start_price * growth[0::2], start_price * growth[1::2]


def write_prices(folder, dates, opens, closes, rng, blanks=()):
    lines = [HEADER]
    for i, (d, o, c) in enumerate(zip(dates, opens, closes)):
        if i in blanks:
            kind = blanks[i]
            if kind == "null":
                lines.append(f"{d.isoformat()},null,null,null,null,null,null\n")
                continue
            lines.append(f"{d.isoformat()},0.000000,{max(o, c):.6f},{min(o, c):.6f},{c:.6f},{c:.6f},0\n")
            continue
        hi = max(o, c) * (1 + abs(rng.normal(0, 0.003)))
        lo = min(o, c) * (1 - abs(rng.normal(0, 0.003)))
        vol = int(rng.integers(1_000_000, 5_000_000_000))
        lines.append(f"{d.isoformat()},{o:.6f},{hi:.6f},{lo:.6f},{c:.6f},{c:.6f},{vol}\n")
    folder.mkdir(parents=True, exist_ok=True)
    (folder / "prices.csv").write_text("".join(lines))


def write_dividends(folder, dates, closes, every, yield_per_payment, rng):
    lines = ["Date,Dividends\n"]
    for i in range(every, len(dates), every):
        amount = closes[i - 1] * yield_per_payment * (1 + rng.normal(0, 0.05))
        lines.append(f"{dates[i].isoformat()},{amount:.6f}\n")
    (folder / "dividends.csv").write_text("".join(lines))


def trend_fixture(symbol, seed, mu_on, mu_in, dividends):
    dates = business_days(date(1990, 1, 2), 8300)
    dates = [d for d in dates if d <= date(2021, 6, 30)]
    n = len(dates)
    params = GbmParams(n_days=n, start_price=353.4, mu_overnight=mu_on, mu_intraday=mu_in,
                       sigma_overnight=0.004, sigma_intraday=0.008, seed=seed)
    g, h = simulate_log_returns(params)
    opens, closes = bars_from_logs(params.start_price, g, h)
    rng = np.random.default_rng(seed + 1)
    folder = HERE / symbol
    write_prices(folder, dates, opens, closes, rng, blanks={400: "null", 1200: "zero"})
    if dividends:
        write_dividends(folder, dates, closes, 63, 0.0045, rng)
    (folder / "splits.csv").write_text("Date,Stock Splits\n")


def random_walk_fixture():
    dates = business_days(date(2010, 1, 4), 1500)
    params = GbmParams(n_days=len(dates), start_price=50.0, sigma_overnight=0.006,
                       sigma_intraday=0.006 * np.sqrt(2), seed=1234)
    g, h = simulate_log_returns(params)
    opens, closes = bars_from_logs(params.start_price, g, h)
    write_prices(HERE / "RW", dates, opens, closes, np.random.default_rng(99))


def split_fixture():
    dates = business_days(date(2020, 6, 1), 120)
    params = GbmParams(n_days=len(dates), start_price=400.0, sigma_overnight=0.005,
                       sigma_intraday=0.01, seed=77)
    g, h = simulate_log_returns(params)
    opens, closes = bars_from_logs(params.start_price, g, h)
    cut = 64
    opens[cut:] /= 4
    closes[cut:] /= 4
    folder = HERE / "SPLT"
    write_prices(folder, dates, opens, closes, np.random.default_rng(5))
    (folder / "splits.csv").write_text(f"Date,Stock Splits\n{dates[cut].isoformat()},4:1\n")
    (folder / "dividends.csv").write_text(f"Date,Dividends\n{dates[30].isoformat()},0.820000\n")


if __name__ == "__main__":
    trend_fixture("SPX", 20210630, np.log(10.0) / 8200, np.log(0.95) / 8200, dividends=True)
    trend_fixture("NDX", 19900102, np.log(14.0) / 8200, np.log(0.70) / 8200, dividends=False)
    random_walk_fixture()
    split_fixture()
