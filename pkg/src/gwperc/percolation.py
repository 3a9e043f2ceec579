"""Quenched critical percolation on a fixed tree.

Exact quantities come from bottom-up dynamic programs over the explicit
arena (:mod:`gwperc._dp`).  Requests deeper than the arena are refused
unless ``allow_closure=True``, in which case the unexplored subtrees below
the arena are integrated out exactly; the result is then the conditional
expectation of the quantity given the explicit levels, and the natural
normalisation to compare it against is the deepest explicit ``W_D``.

Monte Carlo routines explore the open cluster lazily, so they work at any
depth without materialising the tree.  Replicate ``i`` uses percolation key
``derive_key(seed, "perc", i)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _dp, rng
from ._backend import kernels
from ._parallel import chunk_ranges, ordered_map
from .errors import AttemptCapError, InsufficientDepthError, PreconditionError
from .offspring import derive_params
from .tree import GWTree

MIN_SURVIVAL = 1e-6
DEFAULT_ATTEMPT_CAP = 10**9
CHUNK = 1 << 15
POPULATION_CAP = 10**9
LOW_CONFIDENCE = 100


@dataclass(frozen=True)
class PercolationOutcome:
    n: int
    keys: np.ndarray = field(repr=False)
    size: int
    tree: GWTree = field(repr=False, compare=False)

    @property
    def y_n(self) -> list[int]:
        """Arena ids of the surviving depth-``n`` vertices."""
        if self.n > self.tree.generated_depth:
            raise InsufficientDepthError(
                f"depth {self.n} is below the explicit arena; use .keys instead of ids"
            )
        return sorted(self.tree.index_of(int(k)) for k in self.keys)


@dataclass(frozen=True)
class SurvivalCurve:
    q: np.ndarray
    explicit_depth: int

    @property
    def closed(self) -> bool:
        return len(self.q) - 1 > self.explicit_depth

    def __getitem__(self, n):
        return self.q[n]

    def __len__(self):
        return len(self.q)


@dataclass(frozen=True)
class MomentTable:
    """``table[j, i] = E_T[binom(|Y_j|, i)]``."""

    table: np.ndarray
    explicit_depth: int

    @property
    def n(self) -> int:
        return self.table.shape[0] - 1

    @property
    def k(self) -> int:
        return self.table.shape[1] - 1

    def entry(self, j: int, i: int) -> float:
        if not (0 <= j <= self.n and 0 <= i <= self.k):
            raise KeyError(f"moment ({j}, {i}) not in table of depth {self.n}, order {self.k}")
        return float(self.table[j, i])

    def second_moment(self, j: int) -> float:
        """``E_T[|Y_j|^2] = E|Y_j| + 2 E[binom(|Y_j|, 2)]``."""
        return self.entry(j, 1) + 2.0 * self.entry(j, 2)


def _check_depth(tree: GWTree, n: int, allow_closure: bool) -> None:
    if n < 0:
        raise PreconditionError("depth must be non-negative")
    if n > tree.generated_depth and not allow_closure:
        raise InsufficientDepthError(
            f"exact computation to depth {n} needs the tree generated to {n}, "
            f"it is at {tree.generated_depth} (pass allow_closure=True to integrate out deeper levels)"
        )


def survival_exact(tree: GWTree, n: int, allow_closure: bool = False) -> SurvivalCurve:
    """``q_j = P_T[|Y_j| > 0]`` for every ``j <= n``.  Cost is about ``n`` times the arena size."""
    _check_depth(tree, n, allow_closure)
    alg = _dp.SurvivalAlgebra(tree.spec.pmf, 1.0 / tree.mu)
    q = _dp.run(tree.arena, alg, n)[0, :, 0]
    return SurvivalCurve(q, tree.generated_depth)


def survival_probability(tree: GWTree, n: int, allow_closure: bool = False) -> float:
    """``q_n`` alone; cost is one sweep of the arena."""
    _check_depth(tree, n, allow_closure)
    alg = _dp.SurvivalAlgebra(tree.spec.pmf, 1.0 / tree.mu)
    return float(_dp.run(tree.arena, alg, n, j_min=n)[0, 0, 0])


def factorial_moments_exact(tree: GWTree, n: int, k_max: int, allow_closure: bool = False,
                            depths=None) -> MomentTable:
    """``E_T[binom(|Y_j|, i)]`` for ``j <= n``, ``i <= k_max``.

    Each vertex carries the truncated generating polynomial
    ``E[(1 + x)^{|Y(v)|}]``; a child contributes the factor
    ``1 - pc + pc * P_child(x)``.  Expanding that product is the usual
    Steiner-tree sum: each ``k``-subset of depth-``j`` vertices is weighted by
    ``pc`` to the number of edges joining it to the root.

    ``depths`` restricts the work to the listed ``j`` (other rows are NaN).
    """
    if k_max < 1:
        raise PreconditionError("k_max must be at least 1")
    if k_max > 6:
        warnings.warn(f"k_max = {k_max}: high factorial moments may overflow", RuntimeWarning, stacklevel=2)
    _check_depth(tree, n, allow_closure)
    alg = _dp.MomentAlgebra(tree.spec.pmf, 1.0 / tree.mu, k_max)
    if depths is None:
        table = _dp.run(tree.arena, alg, n)[0]
    else:
        table = np.full((n + 1, k_max + 1), np.nan)
        for j in sorted(set(depths)):
            if not 0 <= j <= n:
                raise PreconditionError(f"depth {j} outside 0..{n}")
            table[j] = _dp.run(tree.arena, alg, j, j_min=j)[0, 0]
    return MomentTable(table, tree.generated_depth)


@dataclass(frozen=True)
class SandwichBounds:
    n: int
    lower: float
    value: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.value <= self.upper


def sandwich_bounds(tree: GWTree, n: int, allow_closure: bool = False,
                    q_n: float | None = None, moments: MomentTable | None = None) -> SandwichBounds:
    """Second-moment lower bound, ``n q_n`` and the ``2 w_bar / (1 - pc)`` upper bound."""
    _check_depth(tree, n, allow_closure)
    pc = 1.0 / tree.mu
    if q_n is None:
        q_n = survival_probability(tree, n, allow_closure)
    if moments is None or np.isnan(moments.table[n, 2]):
        moments = factorial_moments_exact(tree, n, 2, allow_closure, depths=[n])
    first = moments.entry(n, 1)
    second = moments.second_moment(n)
    lower = n * first * (first / second) if n > 0 else 0.0
    return SandwichBounds(n, lower, n * q_n, 2.0 * tree.w_bar / (1.0 - pc))


def sandwich_check(tree: GWTree, n: int, allow_closure: bool = False) -> SandwichBounds:
    """As :func:`sandwich_bounds`, raising AssertionError if the ordering fails."""
    b = sandwich_bounds(tree, n, allow_closure)
    if not b.holds:
        raise AssertionError(f"sandwich violated at n={n}: {b.lower} <= {b.value} <= {b.upper} fails")
    return b


# -- Monte Carlo -----------------------------------------------------------
def _salts(tree):
    return tree.arena.salts


def percolate_once(tree: GWTree, n: int, rng_state: int) -> PercolationOutcome:
    """One critical percolation run to depth ``n`` under percolation key ``rng_state``."""
    if n < 0:
        raise PreconditionError("depth must be non-negative")
    keys, _ = kernels.cluster_detail(
        np.uint64(tree.root_key), np.uint64(int(rng_state) & rng.MASK64),
        tree.spec.cdf, _salts(tree), 1.0 / tree.mu, n, 0,
    )
    return PercolationOutcome(n, keys, len(keys), tree)


def perc_key(seed: int, index: int) -> int:
    return rng.derive_key(seed, "perc", index)


def survival_frequency(tree: GWTree, n: int, replicates: int, rng_seed: int, threads: int = 1):
    """Fraction of ``replicates`` percolation runs with ``|Y_n| > 0``."""
    hits = 0
    for sizes in _size_chunks(tree, n, rng_seed, 0, replicates, threads):
        hits += int(np.count_nonzero(sizes))
    return hits / replicates


def _size_chunks(tree, n, seed, start, stop, threads, chunk=CHUNK):
    pc = 1.0 / tree.mu
    cdf, salts = tree.spec.cdf, _salts(tree)

    def work(bounds):
        lo, hi = bounds
        pkeys = rng.derive_keys(seed, "perc", lo, hi - lo)
        roots = np.full(hi - lo, tree.root_key, dtype=np.uint64)
        sizes, _ = kernels.cluster_sizes(roots, pkeys, cdf, salts, pc, n, POPULATION_CAP)
        if np.any(sizes < 0):
            raise AttemptCapError(f"open cluster exceeded {POPULATION_CAP} vertices at one level")
        return sizes

    yield from ordered_map(work, chunk_ranges(start, stop, chunk), threads)


@dataclass(frozen=True)
class ConditionedSample:
    n: int
    sizes: np.ndarray = field(repr=False)
    attempts: int
    accepted_indices: np.ndarray = field(repr=False)

    @property
    def accepted(self) -> int:
        return len(self.sizes)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts

    @property
    def acceptance_se(self) -> float:
        p = self.acceptance_rate
        return math.sqrt(max(p * (1 - p), 0.0) / self.attempts)

    @property
    def scaled(self) -> np.ndarray:
        """``|Y_n| / n`` for the accepted runs."""
        return self.sizes / self.n


def conditioned_sizes(tree: GWTree, n: int, num_accepted: int, rng_seed: int, threads: int = 1,
                      attempt_cap: int = DEFAULT_ATTEMPT_CAP, q_hint: float | None = None) -> ConditionedSample:
    """Rejection-sample ``num_accepted`` runs with ``|Y_n| > 0``.

    Replicates are scanned in index order and the first ``num_accepted``
    survivors are kept, so the result does not depend on ``threads``.
    """
    if n < 1:
        raise PreconditionError("conditioning needs n >= 1")
    if num_accepted < 1:
        raise PreconditionError("num_accepted must be positive")
    q = q_hint if q_hint is not None else survival_probability(tree, n, allow_closure=True)
    if q < MIN_SURVIVAL:
        raise PreconditionError(f"q_{n} = {q:.3g} is below {MIN_SURVIVAL}; rejection sampling is hopeless")
    kept, idx = [], []
    total = 0
    start = 0
    batch = max(CHUNK, int(1.2 * num_accepted / q))
    while total < num_accepted:
        stop = min(start + batch, attempt_cap)
        if stop <= start:
            raise AttemptCapError(f"only {total} of {num_accepted} accepted after {attempt_cap} attempts")
        lo = start
        for sizes in _size_chunks(tree, n, rng_seed, start, stop, threads):
            pos = np.flatnonzero(sizes)
            take = pos[: num_accepted - total]
            kept.append(sizes[take])
            idx.append(lo + take)
            total += len(take)
            if total >= num_accepted:
                attempts = lo + int(take[-1]) + 1
                break
            lo += len(sizes)
        start = stop
    return ConditionedSample(n, np.concatenate(kept), attempts, np.concatenate(idx))


# -- spread --------------------------------------------------------------
def spread_depth(n: int, mu: float) -> int:
    """``ceil(log n / (4 log mu))``, clamped to ``[1, n]``."""
    if n < 1:
        raise PreconditionError("n must be positive")
    m = math.ceil(math.log(n) / (4.0 * math.log(mu)))
    return min(max(m, 1), n)


@dataclass(frozen=True)
class SpreadResult:
    n: int
    m: int
    p_multi: float
    p_max: float
    p_max_raw: float
    accepted: int
    attempts: int
    mean_size: float
    hit_sum: float
    low_confidence: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def spread_diagnostics(tree: GWTree, n: int, replicates: int, rng_seed: int, threads: int = 1,
                       m: int | None = None) -> SpreadResult:
    """Conditioned Monte Carlo estimates of the two spread statistics.

    ``replicates`` is the number of accepted (surviving) runs.

    ``p_multi`` is the fraction of surviving runs that reach depth ``n``
    through two or more depth-``m`` vertices.  For ``p_max`` note that
    ``P_T[v in Y_n] = pc^n`` for every depth-``n`` vertex, so the maximum
    over ``v`` of ``P_T[v in Y_n | survive]`` equals ``pc^n / q_n``; it is
    estimated with the observed acceptance rate in place of ``q_n``.
    ``p_max_raw`` is the naive maximum hit frequency, which cannot go below
    ``1 / accepted`` and is reported for reference only.  ``hit_sum`` (the
    sum of all hit frequencies) must equal ``mean_size``.
    """
    m = spread_depth(n, tree.mu) if m is None else m
    sample = conditioned_sizes(tree, n, replicates, rng_seed, threads)
    pc = 1.0 / tree.mu
    hits: dict[int, int] = {}
    multi = 0
    for i in sample.accepted_indices:
        keys, branches = kernels.cluster_detail(
            np.uint64(tree.root_key), np.uint64(perc_key(rng_seed, int(i))),
            tree.spec.cdf, _salts(tree), pc, n, m,
        )
        multi += branches >= 2
        for k in keys.tolist():
            hits[k] = hits.get(k, 0) + 1
    acc = sample.accepted
    hit_sum = sum(hits.values()) / acc
    return SpreadResult(
        n=n, m=m,
        p_multi=multi / acc,
        p_max=min(1.0, math.exp(n * math.log(pc)) / sample.acceptance_rate),
        p_max_raw=max(hits.values()) / acc,
        accepted=acc,
        attempts=sample.attempts,
        mean_size=float(sample.sizes.mean()),
        hit_sum=hit_sum,
        low_confidence=acc < LOW_CONFIDENCE,
    )


def multi_branch_probability(tree: GWTree, n: int, m: int | None = None, allow_closure: bool = False) -> float:
    """Exact ``P_T[root reaches depth n via >= 2 depth-m vertices | it reaches depth n]``."""
    m = spread_depth(n, tree.mu) if m is None else m
    if not 1 <= m <= n:
        raise PreconditionError(f"need 1 <= m <= n, got m={m}, n={n}")
    _check_depth(tree, n, allow_closure)
    if m > tree.generated_depth:
        raise InsufficientDepthError(f"spread depth {m} exceeds generated depth {tree.generated_depth}")
    pc = 1.0 / tree.mu
    alg = _dp.SurvivalAlgebra(tree.spec.pmf, pc)
    s = _dp.run(tree.arena, alg, n, stop_level=m, j_min=n)[:, 0, 0]
    # per-vertex law of min(#surviving depth-m descendants joined to it, 2)
    state = np.stack([1.0 - s, s, np.zeros_like(s)], axis=1)
    a = tree.arena
    for d in range(m - 1, -1, -1):
        child = (1.0 - pc) * np.array([1.0, 0.0, 0.0]) + pc * state
        sl = a.level(d)
        counts = a.counts[sl]
        starts = a.first_child[sl] - a.level_start[d + 1]
        cur = np.zeros((len(counts), 3))
        cur[:, 0] = 1.0
        for rank in range(int(counts.max())):
            has = counts > rank
            c = child[starts[has] + rank]
            x = cur[has]
            cur[has] = np.stack([
                x[:, 0] * c[:, 0],
                x[:, 0] * c[:, 1] + x[:, 1] * c[:, 0],
                1.0 - x[:, 0] * c[:, 0] - x[:, 0] * c[:, 1] - x[:, 1] * c[:, 0],
            ], axis=1)
        state = cur
    p0, p1 = state[0, 0], state[0, 1]
    return float(1.0 - p1 / (1.0 - p0))


def kolmogorov_ratio(tree: GWTree, n: int, q_n: float | None = None) -> float:
    """``n q_n / (lambda W)`` with ``W`` the deepest explicit ``W_j`` (``j <= n``)."""
    lam = derive_params(tree.spec).lam
    q = survival_probability(tree, n, allow_closure=True) if q_n is None else q_n
    w = tree.w[min(n, tree.generated_depth)]
    return n * q / (lam * w)
