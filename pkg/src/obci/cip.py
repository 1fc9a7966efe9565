"""The three variance estimators and confidence interval assembly.

Centering follows the procedure definitions: OB-I and OB-III center on the
sectioning estimator, OB-II on the batching mean.  Bias constants are always
evaluated at the finite-sample ratio beta_hat = m/n, which makes the variance
estimators exactly asymptotically unbiased along the realized sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .errors import DegenerateIntervalError
from .functionals import FunctionalEstimator, _Mean
from .limits import (
    DEFAULT_REPLICATIONS,
    INFINITE,
    BatchAsymptotics,
    CriticalValueTable,
    WeightFunction,
    constant_sqrt12,
    critical_value,
    kappa1,
    kappa2,
)
from .paths import DEFAULT_GRID
from .series import BatchEstimates, BatchLayout, TimeSeriesData, batch_estimates, prefix_estimates

__all__ = [
    "VarianceEstimate",
    "IntervalResult",
    "classify_b_inf",
    "var_ob1",
    "var_ob2",
    "var_ob3",
    "build_interval",
    "CriticalValueSource",
    "MonteCarloCriticalValues",
    "TableCriticalValues",
]


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    method: str
    kappa_used: float

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("variance estimates are nonnegative")


def classify_b_inf(layout: BatchLayout) -> float:
    """Asymptotic batch-count class of a finite layout.

    The limit is infinite exactly when the offset is o(n); the working rule
    declares INFINITE for d <= sqrt(n) and finite (= realized b) otherwise.
    """
    return INFINITE if layout.d <= math.sqrt(layout.n) else float(layout.b)


def var_ob1(est: BatchEstimates, layout: BatchLayout) -> VarianceEstimate:
    """Scaled batch sample variance around the sectioning estimate."""
    kap = kappa1(layout.beta_hat)
    dev = est.per_batch - est.sectioning
    value = float(dev @ dev) * layout.m / layout.b / kap
    return VarianceEstimate(value=value, method="ob1", kappa_used=kap)


def var_ob2(
    est: BatchEstimates, layout: BatchLayout, b_inf_mode: float | None = None
) -> VarianceEstimate:
    """Scaled batch sample variance around the batching mean.

    ``b_inf_mode`` is the declared asymptotic batch-count class (finite value
    or INFINITE); by default it is classified from the layout.
    """
    if b_inf_mode is None:
        b_inf_mode = classify_b_inf(layout)
    kap = kappa2(layout.beta_hat, b_inf_mode)
    if kap <= 0:
        raise DegenerateIntervalError(f"kappa2 is not positive for this geometry: {kap}")
    dev = est.per_batch - est.batching_mean
    value = float(dev @ dev) * layout.m / layout.b / kap
    return VarianceEstimate(value=value, method="ob2", kappa_used=kap)


def var_ob3(
    data: TimeSeriesData,
    layout: BatchLayout,
    est: FunctionalEstimator,
    weight: WeightFunction | None = None,
) -> VarianceEstimate:
    """Weighted area estimator over per-batch prefix (standardized) series.

    The scale parameter of the standardized series cancels between the weight
    term and the series itself and never enters the computation.  Prefixes
    below the estimator's minimum window contribute zero.
    """
    weight = weight or constant_sqrt12()
    m = layout.m
    if isinstance(est, _Mean) and weight.constant is not None:
        # prefix sums collapse the double loop: j*(mean of first j) is a
        # cumulative-sum difference, so each batch area term is O(1)
        x = data.values
        c = np.concatenate(([0.0], np.cumsum(x)))
        cc = np.concatenate(([0.0], np.cumsum(c[1:])))
        s = layout.starts
        # sum_j (C[s+j] - C[s]) for j = 1..m
        inner = cc[s + m] - cc[s] - m * c[s]
        batch_mean = (c[s + m] - c[s]) / m
        jsum = m * (m + 1) / 2.0
        terms = weight.constant * (inner - batch_mean * jsum) / (m * math.sqrt(m))
        value = float(terms @ terms) / layout.b
        return VarianceEstimate(value=value, method="ob3", kappa_used=1.0)
    j = np.arange(1, m + 1)
    fvals = np.asarray(weight.fn(j / m), dtype=float)
    total = 0.0
    for i in range(1, layout.b + 1):
        prefixes = prefix_estimates(data, layout, i, est)
        dev = prefixes - prefixes[m - 1]
        dev = np.where(np.isnan(dev), 0.0, dev)
        area = float(np.sum(fvals * j * dev)) / (m * math.sqrt(m))
        total += area * area
    return VarianceEstimate(value=total / layout.b, method="ob3", kappa_used=1.0)


@dataclass(frozen=True)
class IntervalResult:
    """A single two-sided confidence interval with its diagnostics."""

    method: str
    center: float
    sigma_hat: float
    half_width: float
    lower: float
    upper: float
    alpha: float
    critical_value_used: float
    n: int
    m: int
    d: int
    b: int
    beta: float
    b_inf_class: float

    def covers(self, truth: float) -> bool:
        return self.lower <= truth <= self.upper

    def csv_line(self) -> str:
        b_inf = "inf" if math.isinf(self.b_inf_class) else str(int(self.b_inf_class))
        return (
            f"{self.lower:.10g},{self.center:.10g},{self.upper:.10g},"
            f"{self.half_width:.10g},{self.sigma_hat:.10g},{self.critical_value_used:.10g},"
            f"{self.beta:.10g},{self.b},{b_inf}"
        )


class CriticalValueSource(Protocol):
    def critical_value(self, method: str, asym: BatchAsymptotics, q: float) -> float: ...


@dataclass
class MonteCarloCriticalValues:
    """On-demand Monte Carlo critical values with an in-process cache."""

    replications: int = DEFAULT_REPLICATIONS
    grid_count: int = DEFAULT_GRID
    master_seed: int = 20240601
    weight: WeightFunction | None = None
    workers: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def critical_value(self, method: str, asym: BatchAsymptotics, q: float) -> float:
        key = (method, asym.beta, asym.b_inf, q)
        if key not in self._cache:
            self._cache[key] = critical_value(
                method,
                asym,
                q,
                replications=self.replications,
                grid_count=self.grid_count,
                master_seed=self.master_seed,
                weight=self.weight,
                workers=self.workers,
            )
        return self._cache[key]


@dataclass
class TableCriticalValues:
    """Critical values looked up from a precomputed table (nearest beta)."""

    table: CriticalValueTable
    warn_tolerance: float = 0.01

    def critical_value(self, method: str, asym: BatchAsymptotics, q: float) -> float:
        from scipy import stats

        if asym.beta == 0:
            return float(stats.norm.ppf(q))
        return self.table.lookup(method, asym.beta, asym.b_inf, q, self.warn_tolerance)


def assemble_interval(
    method: str,
    estimates: BatchEstimates | None,
    layout: BatchLayout,
    alpha: float,
    cv: float,
    variance: VarianceEstimate,
    beta_declared: float | None = None,
) -> IntervalResult:
    """Form the two-sided interval from precomputed pieces.

    Shared by :func:`build_interval` and the replication harness, which
    resolves the critical value once per configuration.
    """
    sigma_hat = math.sqrt(variance.value)
    if sigma_hat == 0.0:
        raise DegenerateIntervalError(f"{method}: zero variance estimate, degenerate interval")
    center = estimates.batching_mean if method == "ob2" else estimates.sectioning
    half_width = cv * sigma_hat / math.sqrt(layout.n)
    beta = layout.beta_hat if beta_declared is None else beta_declared
    return IntervalResult(
        method=method,
        center=center,
        sigma_hat=sigma_hat,
        half_width=half_width,
        lower=center - half_width,
        upper=center + half_width,
        alpha=alpha,
        critical_value_used=cv,
        n=layout.n,
        m=layout.m,
        d=layout.d,
        b=layout.b,
        beta=beta,
        b_inf_class=classify_b_inf(layout),
    )


def build_interval(
    method: str,
    data: TimeSeriesData,
    m: int,
    d: int,
    alpha: float,
    estimator: FunctionalEstimator,
    cv_source: CriticalValueSource | None = None,
    weight: WeightFunction | None = None,
    beta_declared: float | None = None,
    side: str = "two-sided",
) -> IntervalResult:
    """Construct one OB-x (1 - alpha) confidence interval.

    ``beta_declared`` overrides the asymptotic batch fraction used for the
    critical value (small-batch procedures declare 0 and get normal
    quantiles); the bias constants always use the realized m/n.  One-sided
    intervals use the 1 - alpha critical value on the requested side and
    leave the other endpoint infinite.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if method not in ("ob1", "ob2", "ob3"):
        raise ValueError(f"unknown interval method {method!r}")
    if side not in ("two-sided", "lower", "upper"):
        raise ValueError(f"unknown side {side!r}")
    from .series import make_layout

    layout = make_layout(data.n, m, d)
    estimates = batch_estimates(data, layout, estimator)
    b_inf_class = classify_b_inf(layout)
    if method == "ob1":
        variance = var_ob1(estimates, layout)
    elif method == "ob2":
        variance = var_ob2(estimates, layout, b_inf_class)
    else:
        variance = var_ob3(data, layout, estimator, weight)
    beta_cv = layout.beta_hat if beta_declared is None else beta_declared
    cv_source = cv_source or MonteCarloCriticalValues()
    asym = BatchAsymptotics(beta=beta_cv, b_inf=b_inf_class if beta_cv > 0 else INFINITE)
    q = 1.0 - alpha / 2.0 if side == "two-sided" else 1.0 - alpha
    cv = cv_source.critical_value(method, asym, q)
    result = assemble_interval(method, estimates, layout, alpha, cv, variance, beta_declared)
    if side == "lower":
        result = replace(result, upper=math.inf)
    elif side == "upper":
        result = replace(result, lower=-math.inf)
    return result
