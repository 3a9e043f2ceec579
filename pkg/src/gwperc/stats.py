"""Empirical summaries, Kolmogorov-Smirnov distances and log-linear fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True)
class EmpiricalSummary:
    count: int
    mean: float
    variance: float
    sorted_sample: np.ndarray = field(repr=False)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else math.nan

    @classmethod
    def of(cls, sample) -> "EmpiricalSummary":
        x = np.sort(np.asarray(sample, dtype=np.float64))
        if x.size == 0:
            raise PreconditionError("empty sample")
        var = float(x.var(ddof=1)) if x.size > 1 else 0.0
        return cls(int(x.size), float(x.mean()), max(var, 0.0), x)

    def audit(self) -> None:
        if self.variance < 0 or np.any(np.diff(self.sorted_sample) < 0):
            raise AssertionError("summary invariants violated")

    def as_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "variance": self.variance, "std_error": self.std_error}


def ks_distance(sample, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """``sup_x |F_emp(x) - cdf(x)|``, taking both one-sided gaps at each sample point."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n == 0:
        raise PreconditionError("empty sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(min(max(d_plus, d_minus, 0.0), 1.0))


def _rate(lam: float) -> float:
    if not lam > 0:
        raise PreconditionError(f"rate must be positive, got {lam}")
    return float(lam)


def exp_cdf(lam: float):
    """CDF of the exponential law with rate ``lam`` (mean ``1/lam``)."""
    lam = _rate(lam)

    def F(x):
        x = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
        return -np.expm1(-lam * x)

    return F


def gamma2_cdf(lam: float):
    """CDF of the density ``lam^2 x exp(-lam x)`` on ``x > 0``."""
    lam = _rate(lam)

    def G(x):
        x = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
        return -np.expm1(-lam * x) - lam * x * np.exp(-lam * x)

    return G


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    residual: float


def decay_fit(ns, ys) -> DecayFit:
    """Least squares fit of ``log y = intercept + slope * n``; ``residual`` is the RMS misfit."""
    ns = np.asarray(ns, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if ns.shape != ys.shape or ns.size < 2:
        raise PreconditionError("need at least two (n, y) points of matching shape")
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise PreconditionError("decay_fit needs strictly positive finite values")
    A = np.stack([ns, np.ones_like(ns)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(ys), rcond=None)
    resid = np.log(ys) - A @ coef
    return DecayFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))))
