"""Input coercion shared by the estimator wrappers."""

from __future__ import annotations

from datetime import date

import numpy as np
from sklearn.utils import check_array

from .ingest import PriceSeries

_COLUMNS = ("open", "close", "dividend")


def check_price_array(X, min_samples: int = 2) -> np.ndarray:
    """Coerce price input to a finite ``(n, 3)`` float array of ``[open, close, dividend]``.

    Accepts a :class:`PriceSeries`, a DataFrame with ``open``/``close`` (and
    optionally ``dividend``) columns in any case, or an array with two or
    three columns. A missing dividend column is filled with zeros.
    """
    if isinstance(X, PriceSeries):
        X = X.to_array()
    elif hasattr(X, "columns"):
        lower = {str(c).lower(): c for c in X.columns}
        missing = [c for c in _COLUMNS[:2] if c not in lower]
        if missing:
            raise ValueError(f"price frame is missing columns {missing}")
        cols = [X[lower[c]].to_numpy(dtype=float) for c in _COLUMNS if c in lower]
        X = np.column_stack(cols)
    X = check_array(X, dtype=float, ensure_min_samples=min_samples)
    if X.shape[1] == 2:
        X = np.column_stack([X, np.zeros(len(X))])
    if X.shape[1] != 3:
        raise ValueError(f"expected 2 or 3 columns (open, close[, dividend]), got {X.shape[1]}")
    if not (np.all(X[:, :2] > 0) and np.all(X[:, 2] >= 0)):
        raise ValueError("prices must be positive and dividends non-negative")
    return X


def dates_of(X, n: int) -> tuple[date, ...]:
    """Dates carried by ``X`` if it has them, else an empty tuple."""
    if isinstance(X, PriceSeries):
        return tuple(X.dates)
    index = getattr(X, "index", None)
    if index is not None and len(index) == n and all(isinstance(d, date) for d in index):
        return tuple(d.date() if hasattr(d, "date") and callable(d.date) else d for d in index)
    return ()
