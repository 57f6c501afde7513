"""Overnight vs intraday return decomposition, statistics and reporting."""

__version__ = "0.1.0"

from .decompose import (  # noqa: E402
    DividendPolicy,
    SessionReturnSeries,
    WealthCurve,
    cumulative_wealth,
    decompose_series,
    intraday_return,
    overnight_return,
    wealth_curves,
)
from .estimators import SessionDecomposer, SuspicionDetector  # noqa: E402
from .ingest import (  # noqa: E402
    CorporateEvent,
    DailyBar,
    PriceSeries,
    back_adjust_splits,
    fetch_history,
    parse_events_csv,
    parse_price_csv,
    validate_series,
)
from .stats import (  # noqa: E402
    Histogram,
    SuspicionMetrics,
    Thresholds,
    VarianceStats,
    build_histogram,
    classify_suspicion,
    divergence_permutation_test,
    straightness_r2,
    variance_split,
)

__all__ = [
    "CorporateEvent", "DailyBar", "DividendPolicy", "Histogram", "PriceSeries",
    "SessionDecomposer", "SessionReturnSeries", "SuspicionDetector", "SuspicionMetrics",
    "Thresholds", "VarianceStats", "WealthCurve", "back_adjust_splits", "build_histogram",
    "classify_suspicion", "cumulative_wealth", "decompose_series", "divergence_permutation_test",
    "fetch_history", "intraday_return", "overnight_return", "parse_events_csv",
    "parse_price_csv", "straightness_r2", "validate_series", "variance_split", "wealth_curves",
]
