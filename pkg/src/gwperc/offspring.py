"""Offspring laws and the constants derived from them.

Spec strings (used by the command line):

============== ==============================================================
``det:d``      every vertex has exactly ``d`` children
``unif:a:b``   uniform on ``{a, ..., b}``
``pmf:p1,...`` ``P[Z = k] = p_k`` for ``k = 1..K``
``geom:q``     ``P[Z = k] = q (1 - q)^(k - 1)``, ``k >= 1`` (mean ``1/q``)
``poisplus:t`` Poisson(``t``) conditioned to be positive
============== ==============================================================

The analytic families are tabulated until the remaining tail mass drops
below ``TAIL_CUTOFF`` and then renormalised, so every constant below is a
finite sum over one table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from .errors import InvalidSpecError

TAIL_CUTOFF = 1e-14
PMF_TOLERANCE = 1e-12
DEFAULT_K_MAX = 4


@dataclass(frozen=True, eq=False)
class OffspringSpec:
    kind: str
    params: tuple
    pmf: np.ndarray = field(repr=False)
    name: str
    allow_zero: bool = False

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=np.float64)
        if pmf.ndim != 1 or pmf.size == 0:
            raise InvalidSpecError(f"{self.name}: empty probability table")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise InvalidSpecError(f"{self.name}: negative or non-finite probabilities")
        if abs(pmf.sum() - 1.0) > PMF_TOLERANCE:
            raise InvalidSpecError(f"{self.name}: probabilities sum to {pmf.sum()!r}")
        while pmf.size > 1 and pmf[-1] == 0.0:
            pmf = pmf[:-1]
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        if not self.allow_zero:
            if pmf[0] > 0:
                raise InvalidSpecError(f"{self.name}: mass {pmf[0]} at 0; laws must satisfy Z >= 1")
            if self.mean <= 1.0:
                raise InvalidSpecError(f"{self.name}: mean {self.mean} <= 1 is not supercritical")

    def __eq__(self, other):
        if not isinstance(other, OffspringSpec):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.pmf, other.pmf)

    def __hash__(self):
        return hash((self.name, self.pmf.tobytes()))

    @property
    def max_offspring(self) -> int:
        return self.pmf.size - 1

    @cached_property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.pmf.size), self.pmf))

    @cached_property
    def cdf(self) -> np.ndarray:
        """``cdf[k] = P[Z <= k]`` with the last entry pinned to exactly 1."""
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        c.setflags(write=False)
        return c

    @property
    def is_deterministic(self) -> bool:
        return bool(np.count_nonzero(self.pmf) == 1)

    def factorial_moment(self, r: int) -> float:
        """``E[binom(Z, r)]``."""
        ks = range(self.pmf.size)
        return math.fsum(p * math.comb(k, r) for k, p in zip(ks, self.pmf) if p)

    def pgf(self, s):
        """Probability generating function ``E[s^Z]`` (scalar or array)."""
        return np.polynomial.polynomial.polyval(s, self.pmf)

    def __str__(self) -> str:
        return self.name


def deterministic(d: int) -> OffspringSpec:
    pmf = np.zeros(d + 1)
    pmf[d] = 1.0
    return OffspringSpec("deterministic", (d,), pmf, f"det:{d}")


def uniform_range(a: int, b: int) -> OffspringSpec:
    if not 1 <= a <= b:
        raise InvalidSpecError(f"unif:{a}:{b}: need 1 <= a <= b")
    pmf = np.zeros(b + 1)
    pmf[a:] = 1.0 / (b - a + 1)
    return OffspringSpec("uniform-range", (a, b), pmf, f"unif:{a}:{b}")


def finite_pmf(probs) -> OffspringSpec:
    probs = [float(p) for p in probs]
    pmf = np.array([0.0] + probs)
    name = "pmf:" + ",".join(f"{p:g}" for p in probs)
    return OffspringSpec("finite-pmf", tuple(probs), pmf, name)


def _tabulate(first: float, ratio) -> np.ndarray:
    # first = P[Z=1]; ratio(k) = P[Z=k+1]/P[Z=k]
    probs = [first]
    tail = 1.0 - first
    k = 1
    while tail >= TAIL_CUTOFF:
        probs.append(probs[-1] * ratio(k))
        tail -= probs[-1]
        k += 1
        if k > 10_000:
            raise InvalidSpecError("tail does not decay fast enough to tabulate")
    pmf = np.array([0.0] + probs)
    return pmf / pmf.sum()


def geometric_shifted(q: float) -> OffspringSpec:
    if not 0.0 < q < 1.0:
        raise InvalidSpecError(f"geom:{q}: need 0 < q < 1")
    pmf = _tabulate(q, lambda k: 1.0 - q)
    return OffspringSpec("geometric-shifted", (q,), pmf, f"geom:{q:g}")


def poisson_positive(theta: float) -> OffspringSpec:
    if theta <= 0:
        raise InvalidSpecError(f"poisplus:{theta}: need theta > 0")
    first = theta * math.exp(-theta) / -math.expm1(-theta)
    pmf = _tabulate(first, lambda k: theta / (k + 1))
    return OffspringSpec("poisson-conditioned-positive", (theta,), pmf, f"poisplus:{theta:g}")


def parse_spec(text: str) -> OffspringSpec:
    """Parse a spec string such as ``unif:1:3`` (see module docstring)."""
    head, _, rest = text.strip().partition(":")
    try:
        if head == "det":
            return deterministic(int(rest))
        if head == "unif":
            a, b = rest.split(":")
            return uniform_range(int(a), int(b))
        if head == "pmf":
            return finite_pmf(rest.split(","))
        if head == "geom":
            return geometric_shifted(float(rest))
        if head == "poisplus":
            return poisson_positive(float(rest))
    except InvalidSpecError:
        raise
    except ValueError as exc:
        raise InvalidSpecError(f"cannot parse offspring spec {text!r}: {exc}") from None
    raise InvalidSpecError(f"unknown offspring spec {text!r}")


def compositions(k: int, j: int) -> Iterator[tuple[int, ...]]:
    """Ordered ``j``-tuples of positive integers summing to ``k``."""
    if j == 1:
        if k >= 1:
            yield (k,)
        return
    for first in range(1, k - j + 2):
        for rest in compositions(k - first, j - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class CriticalParams:
    mu: float
    pc: float
    phi2: float
    lam: float
    lam_moments: float
    m: tuple[float, ...]
    c: dict
    k_max: int

    def c_coeff(self, k: int, j: int) -> float:
        return self.c[(k, j)]


def derive_params(spec: OffspringSpec, k_max: int = DEFAULT_K_MAX) -> CriticalParams:
    """Critical constants of ``spec``.

    ``lam`` is ``2 / (pc**2 * phi2)`` and ``lam_moments`` the equivalent
    ``2 mu**2 / E[Z(Z-1)]``; ``c[(k, j)] = pc**k * sum over compositions a of
    k into j parts of m[a_1] * ... * m[a_j]`` for ``1 <= j <= k <= k_max``.
    """
    if spec.allow_zero:
        raise InvalidSpecError(f"{spec.name}: critical constants need a supercritical Z >= 1 law")
    if k_max < 1:
        raise InvalidSpecError("k_max must be at least 1")
    mu = spec.mean
    pc = 1.0 / mu
    m = tuple(spec.factorial_moment(r) for r in range(max(k_max, 2) + 1))
    phi2 = 2.0 * m[2]
    c = {}
    for k in range(1, k_max + 1):
        for j in range(1, k + 1):
            total = math.fsum(math.prod(m[a] for a in comp) for comp in compositions(k, j))
            c[(k, j)] = pc**k * total
    return CriticalParams(
        mu=mu,
        pc=pc,
        phi2=phi2,
        lam=2.0 / (pc * pc * phi2),
        lam_moments=2.0 * mu * mu / phi2,
        m=m,
        c=c,
        k_max=k_max,
    )


def sample_offspring(spec: OffspringSpec, rng: np.random.Generator, size=None):
    """Draw from ``spec`` by inverse CDF; deterministic given the generator state."""
    u = rng.random(size)
    draws = np.searchsorted(spec.cdf, u, side="right")
    return int(draws) if size is None else draws


def annealed_offspring(spec: OffspringSpec) -> OffspringSpec:
    """Law of ``Bin(Z, p_c)``: the offspring law of annealed critical percolation."""
    pc = 1.0 / spec.mean
    K = spec.max_offspring
    pmf = np.zeros(K + 1)
    for k, pk in enumerate(spec.pmf):
        if pk == 0:
            continue
        for j in range(k + 1):
            pmf[j] += pk * math.comb(k, j) * pc**j * (1.0 - pc) ** (k - j)
    return OffspringSpec(
        "binomial-thinned", (spec.name,), pmf, f"Bin({spec.name},{pc:g})", allow_zero=True
    )
