"""Utility metrics, trial statistics and variance-bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

EDGE = "edge"
KSTARS = "kstars"


def l2_loss(true_count: float, estimate: float) -> float:
    return (float(true_count) - float(estimate)) ** 2


def relative_error(true_count: float, estimate: float, alpha: float = 1.0) -> float:
    """``|true - est| / max(true, alpha)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return abs(float(true_count) - float(estimate)) / max(float(true_count), alpha)


def _check_mu(mu: float) -> None:
    if not 0 < mu < 0.5:
        raise ValueError(f"mu must lie in (0, 0.5), got {mu}")


def variance_bound(algorithm: str, p: int, q: int, mu: float, s_coeff: float) -> float:
    """Upper bound on the aggregate estimator's variance.

    edge:   mu(1-mu) / (1-2mu)^(2(p-1)q) * ((p-1)q - ((p-1)q + 1) mu^2) * S
    kstars: mu(1-mu) / (1-2mu)^(2(p-1))  * ((p-1)   - p mu^2)          * S
    """
    _check_mu(mu)
    if algorithm == EDGE:
        m = (p - 1) * q
        return mu * (1 - mu) / (1 - 2 * mu) ** (2 * m) * (m - (m + 1) * mu**2) * s_coeff
    if algorithm == KSTARS:
        return mu * (1 - mu) / (1 - 2 * mu) ** (2 * (p - 1)) * ((p - 1) - p * mu**2) * s_coeff
    raise ValueError(f"unknown algorithm {algorithm!r}")


def dominant_factor(p: int, q: int, mu: float) -> float:
    """``(1-2mu)^(-2(p-1)(q-1))``, the leading ratio between the two bounds."""
    return (1 - 2 * mu) ** (-2 * (p - 1) * (q - 1))


def ratio_check_bounds(p: int, q: int, mu: float) -> float:
    """Full ratio edge bound / k-stars bound (independent of S)."""
    return variance_bound(EDGE, p, q, mu, 1.0) / variance_bound(KSTARS, p, q, mu, 1.0)


class RunningStats:
    """Mean/variance accumulator that merges associatively (Chan et al.)."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def extend(self, xs: Iterable[float]) -> "RunningStats":
        for x in xs:
            self.push(float(x))
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats()
        out.n = self.n + other.n
        if out.n == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * other.n / out.n
        out.m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / out.n
        return out

    def variance(self) -> float:
        """Unbiased sample variance (n - 1 denominator)."""
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    def sem(self) -> float:
        return math.sqrt(self.variance() / self.n) if self.n else math.nan


@dataclass(frozen=True)
class TrialStats:
    trials: int
    mean_estimate: float
    variance: float
    l2_mean: float
    rel_err_mean: float
    bound_edge: float
    bound_kstars: float

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.variance < 0 or self.l2_mean < 0:
            raise ValueError("variance and l2 must be non-negative")

    @property
    def sem(self) -> float:
        return math.sqrt(self.variance / self.trials)

    def z_score(self, true_count: float) -> float:
        """Distance of the trial mean from the truth in standard errors."""
        if self.sem == 0:
            return 0.0 if self.mean_estimate == true_count else math.inf
        return (self.mean_estimate - true_count) / self.sem


def trial_stats(
    true_count: float,
    estimates: Iterable[float],
    p: int,
    q: int,
    mu: float,
    s_coeff: float,
    alpha: float = 1.0,
) -> TrialStats:
    est = RunningStats()
    l2 = RunningStats()
    rel = RunningStats()
    for x in estimates:
        est.push(float(x))
        l2.push(l2_loss(true_count, x))
        rel.push(relative_error(true_count, x, alpha))
    if 0 < mu < 0.5:
        be, bk = variance_bound(EDGE, p, q, mu, s_coeff), variance_bound(KSTARS, p, q, mu, s_coeff)
    else:
        be = bk = 0.0
    return TrialStats(est.n, est.mean, est.variance(), l2.mean, rel.mean, be, bk)
