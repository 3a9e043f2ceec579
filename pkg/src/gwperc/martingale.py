"""Corrected factorial-moment martingales along the tree filtration.

``M_n^(k) = E_T[binom(|Y_n|, k)] - sum_{i<k} c_{k,i} sum_{j<n} E_T[binom(|Y_j|, i)]``.

The martingale property is conditional on the first ``n`` tree levels,
which cannot be sampled as such; :func:`increment_study` checks its
integrated consequence ``E[M_{n+1} - M_n] = 0`` over independent trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _dp, rng
from ._parallel import chunk_ranges, ordered_map
from .errors import PreconditionError
from .offspring import CriticalParams, OffspringSpec, derive_params
from .percolation import MomentTable, factorial_moments_exact
from .stats import DecayFit, decay_fit
from .tree import Arena, GWTree

MIN_REPLICATES = 100
FIT_FROM = 3


def _corrections(table: np.ndarray, k: int, params: CriticalParams) -> np.ndarray:
    """``M_n`` for every row ``n`` of a ``(n + 1, k + 1)`` moment table."""
    # depth is the second-to-last axis; leading axes index trees
    zero = np.zeros(table.shape[:-2] + (1, table.shape[-1]))
    prefix = np.concatenate([zero, np.cumsum(table[..., :-1, :], axis=-2)], axis=-2)
    out = table[..., k].copy()
    for i in range(1, k):
        out -= params.c_coeff(k, i) * prefix[..., i]
    return out


def m_statistic(tree: GWTree, n: int, k: int, moments: MomentTable, params: CriticalParams | None = None) -> float:
    """``M_n^(k)`` from a precomputed moment table."""
    if k < 1:
        raise PreconditionError("k must be at least 1")
    if n > moments.n or k > moments.k:
        raise KeyError(f"moment table (depth {moments.n}, order {moments.k}) does not cover n={n}, k={k}")
    rows = moments.table[: n + 1]
    if np.isnan(rows[:, :k]).any() or np.isnan(rows[n, k]):
        raise KeyError("moment table is missing entries needed for M_n^(k)")
    params = params or derive_params(tree.spec, max(k, 1))
    return float(_corrections(rows, k, params)[n])


@dataclass(frozen=True)
class MartingaleTrace:
    k: int
    values: np.ndarray
    tree_seed: int


def trace(tree: GWTree, n_max: int, k: int) -> MartingaleTrace:
    params = derive_params(tree.spec, max(k, 1))
    moments = factorial_moments_exact(tree, n_max, k)
    return MartingaleTrace(k, _corrections(moments.table, k, params), tree.master_seed)


def replicate_tree_seed(seed: int, r: int) -> int:
    """Master seed of tree replicate ``r`` in a study seeded with ``seed``."""
    return rng.derive_key(seed, "tree-replicate", r)


@dataclass(frozen=True)
class IncrementStudy:
    k: int
    n_max: int
    replicates: int
    mean_increment: np.ndarray
    std_error: np.ndarray
    l2_increment: np.ndarray
    fit: DecayFit | None
    traces: np.ndarray = field(repr=False)

    @property
    def max_abs_z(self) -> float:
        se = np.where(self.std_error > 0, self.std_error, np.inf)
        z = np.abs(self.mean_increment) / se
        z[(self.std_error == 0) & (self.mean_increment != 0)] = np.inf
        return float(np.max(z))


def increment_study(spec: OffspringSpec, k: int, n_max: int, tree_replicates: int, seed: int,
                    threads: int = 1, batch: int = 200) -> IncrementStudy:
    """Per-``n`` mean and L2 norm of ``M_{n+1}^(k) - M_n^(k)`` over independent trees.

    Replicate ``r`` is the tree ``GWTree(spec, replicate_tree_seed(seed, r))``.
    The decay fit uses ``n >= 3`` and is omitted when increments vanish.
    """
    if tree_replicates < MIN_REPLICATES:
        raise PreconditionError(f"need at least {MIN_REPLICATES} tree replicates, got {tree_replicates}")
    if n_max < 1 or k < 1:
        raise PreconditionError("need n_max >= 1 and k >= 1")
    params = derive_params(spec, max(k, 1))
    alg = _dp.MomentAlgebra(spec.pmf, params.pc, k)

    def work(bounds):
        lo, hi = bounds
        roots = np.array(
            [rng.derive_key(replicate_tree_seed(seed, r), "tree", 0) for r in range(lo, hi)], dtype=np.uint64
        )
        forest = Arena(roots, spec.cdf)
        forest.grow(n_max, max_vertices=1 << 62)
        table = _dp.run(forest, alg, n_max)  # (R, n_max + 1, k + 1)
        return _corrections(table, k, params)

    traces = np.concatenate(list(ordered_map(work, chunk_ranges(0, tree_replicates, batch), threads)))
    inc = np.diff(traces, axis=1)
    mean = inc.mean(axis=0)
    se = inc.std(axis=0, ddof=1) / math.sqrt(tree_replicates)
    l2 = np.sqrt(np.mean(inc**2, axis=0))
    ns = np.arange(n_max)
    sel = (ns >= FIT_FROM) & (l2 > 0)
    fit = decay_fit(ns[sel], l2[sel]) if sel.sum() >= 2 else None
    return IncrementStudy(k, n_max, tree_replicates, mean, se, l2, fit, traces)
