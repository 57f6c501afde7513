"""
scikit-learn compatible wrappers around the decomposition and classifier.

``SessionDecomposer`` is a stateless transformer from price rows to session
returns, so it can sit in a ``Pipeline``. ``SuspicionDetector`` treats a whole
price history as one observation: ``fit`` computes the metrics and ``predict``
returns the flag.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .decompose import DividendPolicy, SessionReturnSeries, session_returns, wealth_curves
from .stats import Thresholds, classify_suspicion, variance_split
from .validation import check_price_array, dates_of


class SessionDecomposer(TransformerMixin, BaseEstimator):
    """Map ``[open, close, dividend]`` rows to ``[overnight, intraday]`` returns.

    The first output row's overnight return is NaN.

    Parameters
    ----------
    policy : {'reinvest', 'drop'}, default='reinvest'
        Whether a dividend is added back to the overnight leg of its ex-date.
    """

    def __init__(self, policy="reinvest"):
        self.policy = policy

    def fit(self, X, y=None):
        X = check_price_array(X)
        self.policy_ = DividendPolicy.parse(self.policy)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "policy_")
        overnight, intraday = session_returns(check_price_array(X), self.policy_)
        return np.column_stack([overnight, intraday])

    def get_feature_names_out(self, input_features=None):
        return np.array(["overnight", "intraday"], dtype=object)


class SuspicionDetector(BaseEstimator):
    """Score one price history for the overnight-up / intraday-down pattern.

    Parameters
    ----------
    policy : {'reinvest', 'drop'}, default='reinvest'
    alpha : float, default=0.01
        Significance level of the sign-flip permutation test.
    min_straightness : float, default=0.8
        Minimum R^2 of both log-wealth curves against time.
    n_permutations : int, default=10000
    random_state : int, default=0
        Seed of the permutation test.

    Attributes
    ----------
    metrics_ : SuspicionMetrics
    variance_ : VarianceStats or None
    curves_ : tuple of WealthCurve
    flagged_ : bool
    """

    def __init__(self, policy="reinvest", alpha=0.01, min_straightness=0.8,
                 n_permutations=10000, random_state=0):
        self.policy = policy
        self.alpha = alpha
        self.min_straightness = min_straightness
        self.n_permutations = n_permutations
        self.random_state = random_state

    def _thresholds(self):
        return Thresholds(alpha=self.alpha, min_straightness=self.min_straightness,
                          n_permutations=self.n_permutations, seed=int(self.random_state))

    def _session_series(self, X):
        arr = check_price_array(X)
        policy = DividendPolicy.parse(self.policy)
        overnight, intraday = session_returns(arr, policy)
        return SessionReturnSeries(instrument_id=getattr(X, "instrument_id", ""),
                                   dates=dates_of(X, len(arr)), overnight=overnight,
                                   intraday=intraday, policy=policy)

    def fit(self, X, y=None):
        srs = self._session_series(X)
        self.curves_ = wealth_curves(srs)
        self.metrics_ = classify_suspicion(srs, self._thresholds(), self.curves_)
        try:
            self.variance_ = variance_split(srs)
        except ArithmeticError:
            self.variance_ = None
        self.flagged_ = self.metrics_.flagged
        return self

    def predict(self, X):
        """Flag for the history ``X`` (recomputed with the fitted parameters)."""
        check_is_fitted(self, "metrics_")
        srs = self._session_series(X)
        return classify_suspicion(srs, self._thresholds()).flagged

    def fit_predict(self, X, y=None):
        return self.fit(X).flagged_
