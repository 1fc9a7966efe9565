"""Point estimators of statistical functionals over windows of observations.

Every estimator maps an ordered window of reals to one real number and is
deterministic in its input.  Windows shorter than ``min_window`` are rejected,
never silently extrapolated; windows on which the functional is undefined
raise :class:`~obci.errors.DegenerateEstimateError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateEstimateError

__all__ = [
    "FunctionalEstimator",
    "mean_estimator",
    "quantile_estimator",
    "cvar_estimator",
    "cvar_tail_mean_estimator",
    "ar1_estimator",
    "nhpp_rate_estimator",
    "cvar_min_window",
    "parse_estimator_tag",
]


class FunctionalEstimator:
    """Interface contract for window estimators.

    Subclasses set ``tag`` and ``min_window`` and implement :meth:`estimate`.
    ``sliding_estimates`` and ``prefix_estimates`` are optional fast paths;
    both mark degenerate windows with NaN instead of raising, so bulk callers
    can do their own NA accounting.
    """

    tag: str = ""
    min_window: int = 1

    def estimate(self, window: np.ndarray) -> float:
        raise NotImplementedError

    def check_window(self, window: np.ndarray) -> np.ndarray:
        window = np.asarray(window, dtype=float)
        if window.ndim != 1 or window.size < self.min_window:
            raise DegenerateEstimateError(
                f"{self.tag}: window of size {window.size} below min_window={self.min_window}"
            )
        return window

    def sliding_estimates(self, x: np.ndarray, starts: np.ndarray, m: int) -> np.ndarray | None:
        """Vectorized estimates over the windows ``x[s : s + m]``, or None."""
        return None

    def prefix_estimates(self, window: np.ndarray) -> np.ndarray:
        """Estimates over the first ``j`` observations, ``j = 1..len(window)``.

        Entries with ``j < min_window`` (and degenerate prefixes) are NaN;
        the weighted-area estimator treats them as zero contributions.
        """
        window = np.asarray(window, dtype=float)
        out = np.full(window.size, np.nan)
        for j in range(self.min_window, window.size + 1):
            try:
                out[j - 1] = self.estimate(window[:j])
            except DegenerateEstimateError:
                pass
        return out


class _Mean(FunctionalEstimator):
    tag = "mean"
    min_window = 1

    def estimate(self, window: np.ndarray) -> float:
        window = self.check_window(window)
        return float(window.mean())

    def sliding_estimates(self, x, starts, m):
        c = np.concatenate(([0.0], np.cumsum(x)))
        return (c[starts + m] - c[starts]) / m

    def prefix_estimates(self, window):
        window = np.asarray(window, dtype=float)
        return np.cumsum(window) / np.arange(1, window.size + 1)


@dataclass(frozen=True)
class _Quantile(FunctionalEstimator):
    """Smallest order statistic whose empirical cdf reaches ``gamma``."""

    gamma: float
    tag: str = field(init=False)
    min_window = 1

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        object.__setattr__(self, "tag", f"quantile:{self.gamma:g}")

    def order_index(self, w: int) -> int:
        return math.ceil(self.gamma * w)

    def estimate(self, window):
        window = self.check_window(window)
        k = self.order_index(window.size)
        return float(np.partition(window, k - 1)[k - 1])

    def sliding_estimates(self, x, starts, m):
        windows = sliding_window_view(np.asarray(x, dtype=float), m)[starts]
        k = self.order_index(m)
        return np.partition(windows, k - 1, axis=1)[:, k - 1]


def cvar_min_window(gamma: float) -> int:
    """Smallest window length with ``ceil(gamma * w) < w`` (an exceedance is possible)."""
    w = 1
    while math.ceil(gamma * w) >= w:
        w += 1
    return w


@dataclass(frozen=True)
class _CVaRSum(FunctionalEstimator):
    """Normalized tail sum ``(1 / (w (1 - gamma))) * sum of Z 1{Z >= q}``.

    ``q`` is the window's own empirical ``gamma``-quantile unless supplied
    (the known-quantile mode); with a known ``q`` a window containing no
    observation at or above ``q`` is degenerate.
    """

    gamma: float
    q: float | None = None
    tag: str = field(init=False)
    min_window: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        object.__setattr__(self, "min_window", cvar_min_window(self.gamma))
        suffix = "" if self.q is None else f":{self.q:g}"
        object.__setattr__(self, "tag", f"cvar:{self.gamma:g}{suffix}")

    def _threshold(self, window: np.ndarray) -> float:
        if self.q is not None:
            return self.q
        k = math.ceil(self.gamma * window.size)
        return float(np.partition(window, k - 1)[k - 1])

    def estimate(self, window):
        window = self.check_window(window)
        q = self._threshold(window)
        mask = window >= q
        if not mask.any():
            raise DegenerateEstimateError(f"{self.tag}: no observation at or above q={q}")
        return float(window[mask].sum() / (window.size * (1.0 - self.gamma)))

    def sliding_estimates(self, x, starts, m):
        x = np.asarray(x, dtype=float)
        if self.q is None:
            windows = sliding_window_view(x, m)[starts]
            k = math.ceil(self.gamma * m)
            part = np.partition(windows, k - 1, axis=1)
            return part[:, k - 1 :].sum(axis=1) / (m * (1.0 - self.gamma))
        indic = x >= self.q
        s = np.concatenate(([0.0], np.cumsum(x * indic)))
        c = np.concatenate(([0], np.cumsum(indic)))
        sums = s[starts + m] - s[starts]
        counts = c[starts + m] - c[starts]
        out = sums / (m * (1.0 - self.gamma))
        return np.where(counts > 0, out, np.nan)


@dataclass(frozen=True)
class _CVaRTailMean(FunctionalEstimator):
    """Mean of the window observations at or above the quantile threshold.

    The tail-conditional (ratio) form of the CVaR estimator; with a known
    threshold this is the variant whose sampling variance matches the
    coverage studies (see the cvar study presets).  Degenerate when the
    window has no exceedance.
    """

    gamma: float
    q: float | None = None
    tag: str = field(init=False)
    min_window: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        object.__setattr__(self, "min_window", cvar_min_window(self.gamma))
        suffix = "" if self.q is None else f":{self.q:g}"
        object.__setattr__(self, "tag", f"cvartail:{self.gamma:g}{suffix}")

    def estimate(self, window):
        window = self.check_window(window)
        if self.q is None:
            k = math.ceil(self.gamma * window.size)
            part = np.partition(window, k - 1)
            return float(part[k - 1 :].mean())
        mask = window >= self.q
        if not mask.any():
            raise DegenerateEstimateError(f"{self.tag}: no observation at or above q={self.q}")
        return float(window[mask].mean())

    def sliding_estimates(self, x, starts, m):
        x = np.asarray(x, dtype=float)
        if self.q is None:
            windows = sliding_window_view(x, m)[starts]
            k = math.ceil(self.gamma * m)
            part = np.partition(windows, k - 1, axis=1)
            return part[:, k - 1 :].mean(axis=1)
        indic = x >= self.q
        s = np.concatenate(([0.0], np.cumsum(x * indic)))
        c = np.concatenate(([0], np.cumsum(indic)))
        sums = s[starts + m] - s[starts]
        counts = c[starts + m] - c[starts]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = sums / counts
        return np.where(counts > 0, out, np.nan)


class _AR1(FunctionalEstimator):
    """Least-squares lag-one coefficient with the intercept fixed at zero."""

    tag = "ar1"
    min_window = 2

    def estimate(self, window):
        window = self.check_window(window)
        den = float(np.dot(window[:-1], window[:-1]))
        if den == 0.0:
            raise DegenerateEstimateError("ar1: zero denominator (window has no signal)")
        return float(np.dot(window[:-1], window[1:]) / den)

    def sliding_estimates(self, x, starts, m):
        x = np.asarray(x, dtype=float)
        xy = np.concatenate(([0.0], np.cumsum(x[:-1] * x[1:])))
        xx = np.concatenate(([0.0], np.cumsum(x * x)))
        num = xy[starts + m - 1] - xy[starts]
        den = xx[starts + m - 1] - xx[starts]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = num / den
        return np.where(den > 0, out, np.nan)


@dataclass(frozen=True)
class _NhppRate(FunctionalEstimator):
    """Window mean of per-replication increment counts, divided by delta."""

    delta: float
    tag: str = field(init=False)
    min_window = 1

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "tag", f"nhpp:{self.delta:g}")

    def estimate(self, window):
        window = self.check_window(window)
        if (window < 0).any():
            raise ValueError("nhpp rate estimator requires nonnegative increment counts")
        return float(window.mean() / self.delta)

    def sliding_estimates(self, x, starts, m):
        x = np.asarray(x, dtype=float)
        if (x < 0).any():
            raise ValueError("nhpp rate estimator requires nonnegative increment counts")
        c = np.concatenate(([0.0], np.cumsum(x)))
        return (c[starts + m] - c[starts]) / (m * self.delta)


def mean_estimator() -> FunctionalEstimator:
    """Window average."""
    return _Mean()


def quantile_estimator(gamma: float) -> FunctionalEstimator:
    """Smallest order statistic with empirical cdf >= gamma."""
    return _Quantile(gamma)


def cvar_estimator(gamma: float, q: float | None = None) -> FunctionalEstimator:
    """Normalized CVaR tail sum; plug-in quantile unless ``q`` is given."""
    return _CVaRSum(gamma, q)


def cvar_tail_mean_estimator(gamma: float, q: float | None = None) -> FunctionalEstimator:
    """Tail-conditional mean above the (known or plug-in) quantile."""
    return _CVaRTailMean(gamma, q)


def ar1_estimator() -> FunctionalEstimator:
    return _AR1()


def nhpp_rate_estimator(delta: float) -> FunctionalEstimator:
    return _NhppRate(delta)


def parse_estimator_tag(tag: str) -> FunctionalEstimator:
    """Build an estimator from its CLI tag.

    Accepted forms: ``mean``, ``quantile:G``, ``cvar:G[:Q]``,
    ``cvartail:G[:Q]``, ``ar1``, ``nhpp:DELTA``.
    """
    parts = tag.split(":")
    kind = parts[0]
    try:
        if kind == "mean" and len(parts) == 1:
            return mean_estimator()
        if kind == "ar1" and len(parts) == 1:
            return ar1_estimator()
        if kind == "quantile" and len(parts) == 2:
            return quantile_estimator(float(parts[1]))
        if kind == "cvar" and len(parts) in (2, 3):
            q = float(parts[2]) if len(parts) == 3 else None
            return cvar_estimator(float(parts[1]), q)
        if kind == "cvartail" and len(parts) in (2, 3):
            q = float(parts[2]) if len(parts) == 3 else None
            return cvar_tail_mean_estimator(float(parts[1]), q)
        if kind == "nhpp" and len(parts) == 2:
            return nhpp_rate_estimator(float(parts[1]))
    except ValueError as exc:
        raise ValueError(f"bad estimator tag {tag!r}: {exc}") from exc
    raise ValueError(f"unknown estimator tag {tag!r}")
