"""
Statistics that quantify the overnight/intraday pattern.

* :func:`build_histogram` bins returns with the edge bins absorbing under- and overflow.
* :func:`variance_split` measures how much of the daily variance realises intraday.
* :func:`straightness_r2` scores how close a log-wealth curve is to a straight line.
* :func:`divergence_permutation_test` asks whether overnight beats intraday more
  than per-day random relabelling of the two sessions would allow.
* :func:`classify_suspicion` combines the three into a single flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decompose import SessionReturnSeries, WealthCurve, wealth_curves
from .exceptions import DegenerateError, DomainError, InsufficientDataError

DEFAULT_EDGES = np.linspace(-0.05, 0.05, 102)
MIN_PERMUTATION_DAYS = 10

# Permutation i draws its signs from block i // _BLOCK of the (seed, block) stream.
_BLOCK = 1024
_BYTE_BITS = ((np.arange(256)[:, None] >> np.arange(8)) & 1).astype(float)
_BYTE_SIGNS = 2.0 * _BYTE_BITS - 1.0


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def same_edges(self, other: Histogram) -> bool:
        return self.edges.shape == other.edges.shape and bool(np.all(self.edges == other.edges))


@dataclass(frozen=True)
class VarianceStats:
    var_intraday: float
    var_overnight: float
    intraday_fraction: float


@dataclass(frozen=True)
class Thresholds:
    alpha: float = 0.01
    min_straightness: float = 0.8
    n_permutations: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.min_straightness <= 1:
            raise DomainError(f"min_straightness must lie in [0, 1], got {self.min_straightness}")
        if int(self.n_permutations) < 1:
            raise DomainError(f"n_permutations must be positive, got {self.n_permutations}")


@dataclass(frozen=True)
class SuspicionMetrics:
    cum_intraday: float
    cum_overnight: float
    log_wealth_gap: float
    straightness_overnight: Optional[float]
    straightness_intraday: Optional[float]
    statistic: float
    p_value: float
    flagged: bool


def build_histogram(values, edges=DEFAULT_EDGES) -> Histogram:
    """Count ``values`` into bins ``[edges[i], edges[i+1])``.

    Values below ``edges[0]`` go to the first bin and values at or above
    ``edges[-1]`` go to the last, so every finite value is counted once.
    NaN entries (undefined returns) are not observations and are dropped.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2:
        raise DomainError("need at least two bin edges")
    if not np.all(np.diff(edges) > 0):
        raise DomainError("bin edges must be strictly increasing")
    v = np.asarray(values, dtype=float).ravel()
    v = v[~np.isnan(v)]
    m = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, m - 1)
    return Histogram(edges=edges, counts=np.bincount(idx, minlength=m).astype(np.int64))


def variance_split(srs: SessionReturnSeries) -> VarianceStats:
    """Population variances of both streams and the intraday share of their sum."""
    on = srs.overnight[~np.isnan(srs.overnight)]
    intra = srs.intraday[~np.isnan(srs.intraday)]
    if len(on) < 2 or len(intra) < 2:
        raise InsufficientDataError("need at least 2 defined returns in each session")
    v_on = float(np.var(on))
    v_in = float(np.var(intra))
    total = v_on + v_in
    if not total > 0:
        raise DegenerateError("zero total variance")
    return VarianceStats(var_intraday=v_in, var_overnight=v_on, intraday_fraction=v_in / total)


def straightness_r2(curve) -> float:
    """R^2 of an OLS fit of log wealth against the point index.

    Accepts a :class:`WealthCurve` or a plain sequence of positive values.
    """
    values = curve.values if isinstance(curve, WealthCurve) else np.asarray(curve, dtype=float)
    if len(values) < 3:
        raise DomainError(f"need at least 3 points, got {len(values)}")
    if not np.all(values > 0):
        raise DomainError("wealth values must be positive")
    y = np.log(values)
    t = np.arange(len(y), dtype=float)
    tc = t - t.mean()
    yc = y - y.mean()
    ss_tot = float(yc @ yc)
    # relative floor: rounding noise in a flat curve must not read as signal
    if ss_tot <= (np.finfo(float).eps * max(1.0, float(np.abs(y).max()))) ** 2 * len(y):
        raise DegenerateError("log wealth is constant")
    slope = float(tc @ yc) / float(tc @ tc)
    resid = yc - slope * tc
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return min(1.0, max(0.0, r2))


def session_log_differences(srs: SessionReturnSeries) -> np.ndarray:
    """Per-day ``log(1 + overnight) - log(1 + intraday)`` on days with both legs."""
    on, intra = srs.common()
    if np.any(on <= -1) or np.any(intra <= -1):
        raise DomainError("returns must be greater than -1")
    return np.log1p(on) - np.log1p(intra)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, block]))


def sign_flip_sums(d, n_permutations: int, seed: int) -> np.ndarray:
    """Sums of ``d`` under ``n_permutations`` independent random sign flips.

    Signs are drawn eight days at a time as random bytes, and each byte
    indexes a precomputed table of the 256 partial sums for its group.
    Permutation ``i`` always uses the same bytes for a given ``seed``.
    """
    d = np.asarray(d, dtype=float)
    groups = -(-len(d) // 8)
    padded = np.zeros(groups * 8)
    padded[: len(d)] = d
    table = padded.reshape(groups, 8) @ _BYTE_SIGNS.T  # (groups, 256)
    rows = np.arange(groups)
    out = np.empty(n_permutations)
    for block, lo in enumerate(range(0, n_permutations, _BLOCK)):
        hi = min(lo + _BLOCK, n_permutations)
        draws = _block_rng(seed, block).integers(0, 256, size=(_BLOCK, groups), dtype=np.uint8)
        out[lo:hi] = table[rows, draws[: hi - lo]].sum(axis=1)
    return out


def tie_tolerance(d) -> float:
    return 1e-10 * float(np.abs(d).sum())


def divergence_permutation_test(srs, n_permutations: int = 10000, seed: int = 0):
    """One-sided sign-flip test of overnight outperforming intraday.

    The observed statistic is ``S = sum(d)`` with ``d`` from
    :func:`session_log_differences`. Under the null each ``d_t`` is equally
    likely to carry either sign. Sums within floating-point noise of ``S``
    count as ties (at or above ``S``).

    Args:
        srs: A :class:`SessionReturnSeries`, or the per-day differences ``d`` directly.
        n_permutations: Number of random sign assignments.
        seed: Seed of the sign streams; results are deterministic given it.

    Returns:
        ``(S, p)`` with ``p = (1 + #{S_perm >= S}) / (n_permutations + 1)``.
    """
    if isinstance(srs, SessionReturnSeries):
        d = session_log_differences(srs)
    else:
        d = np.asarray(srs, dtype=float)
    if len(d) < MIN_PERMUTATION_DAYS:
        raise InsufficientDataError(
            f"need at least {MIN_PERMUTATION_DAYS} days with both sessions, got {len(d)}")
    n_permutations = int(n_permutations)
    if n_permutations < 1:
        raise DomainError("n_permutations must be positive")
    s = float(d.sum())
    perm = sign_flip_sums(d, n_permutations, seed)
    exceed = int(np.count_nonzero(perm >= s - tie_tolerance(d)))
    return s, (1 + exceed) / (n_permutations + 1)


def _straightness_or_none(curve):
    try:
        return straightness_r2(curve)
    except DegenerateError:
        return None


def classify_suspicion(srs: SessionReturnSeries, thresholds: Thresholds = Thresholds(),
                       curves: Optional[tuple[WealthCurve, WealthCurve]] = None) -> SuspicionMetrics:
    """Compute every metric and flag the series.

    A series is flagged when cumulative intraday return is negative, the
    permutation p-value is at most ``alpha`` (so ``alpha=1`` disables that
    clause), and both wealth curves are at
    least ``min_straightness`` straight. A curve whose straightness is
    undefined (flat log wealth) is left out of the last clause.
    """
    on_curve, in_curve = curves if curves is not None else wealth_curves(srs)
    s, p = divergence_permutation_test(srs, thresholds.n_permutations, thresholds.seed)
    r2_on = _straightness_or_none(on_curve)
    r2_in = _straightness_or_none(in_curve)
    defined = [r for r in (r2_on, r2_in) if r is not None]
    straight = min(defined) >= thresholds.min_straightness if defined else True
    cum_in = in_curve.final - 1.0
    flagged = bool(cum_in < 0 and p <= thresholds.alpha and straight)
    return SuspicionMetrics(
        cum_intraday=cum_in,
        cum_overnight=on_curve.final - 1.0,
        log_wealth_gap=float(np.log(on_curve.final) - np.log(in_curve.final)),
        straightness_overnight=r2_on,
        straightness_intraday=r2_in,
        statistic=s,
        p_value=p,
        flagged=flagged,
    )
