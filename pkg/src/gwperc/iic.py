"""The quenched incipient infinite cluster via a size-biased spine.

A sample is built one level at a time.  From spine vertex ``u`` the next
spine vertex is child ``w`` with probability proportional to a weight
``What(w)``, the spine edge is forced open, and every other edge down to
depth ``n`` is open independently with probability ``pc``.

Two weight conventions are offered:

``"relative"`` (default)
    ``What(w) = Z_m(w) / mu^m``, counted lazily ``m`` levels below each
    child.  No explicit tree is needed, so ``n`` can be large.
``"absolute"``
    ``What(w) = Z_{L-|w|}(w) / mu^{L-|w|}`` for a fixed horizon ``L = n + m``.
    These satisfy ``What(u) = pc * sum_w What(w)`` exactly, so the sampler
    reproduces :func:`iic_marginal_exact` with the same horizon exactly.
    Requires the tree generated to depth ``L``.

For deterministic offspring laws every weight is equal and both reduce to
uniform spine steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._backend import MODE_RELATIVE, MODE_TABLE, MODE_UNIFORM, kernels
from ._parallel import chunk_ranges, ordered_map
from .errors import AttemptCapError, InsufficientDepthError, PreconditionError, TreeFormatError
from .offspring import OffspringSpec, derive_params
from .stats import EmpiricalSummary, gamma2_cdf, ks_distance
from .tree import GWTree

DEFAULT_LOOKAHEAD = 20
POPULATION_CAP = 10**9
MIN_REPLICATES = 1000
CHUNK = 256
HORIZONS = ("relative", "absolute")


@dataclass(frozen=True)
class IICSample:
    """One IIC cluster truncated at depth ``n``.

    ``cluster_keys[i]`` sits at depth ``depths[i]`` with parent
    ``cluster_keys[parents[i]]`` (``-1`` for the root).
    """

    n: int
    spine: np.ndarray
    cluster_keys: np.ndarray = field(repr=False)
    depths: np.ndarray = field(repr=False)
    parents: np.ndarray = field(repr=False)
    c_n: int

    def spine_ids(self, tree: GWTree) -> list[int]:
        return [tree.index_of(int(k)) for k in self.spine]

    def cluster_ids(self, tree: GWTree) -> list[int]:
        return sorted(tree.index_of(int(k)) for k in self.cluster_keys)


def _check_horizon(horizon):
    if horizon not in HORIZONS:
        raise PreconditionError(f"horizon must be one of {HORIZONS}, got {horizon!r}")


def spine_weight_table(tree: GWTree, n: int, horizon_depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted keys of the depth ``1..n`` vertices and their ``Z_{L-d}`` counts."""
    if horizon_depth > tree.generated_depth:
        raise InsufficientDepthError(
            f"absolute horizon {horizon_depth} needs the tree generated to that depth "
            f"(it is at {tree.generated_depth})"
        )
    a = tree.arena
    keys, vals = [], []
    for d in range(1, n + 1):
        lo, hi = a.descendant_ranges(d, horizon_depth - d)
        keys.append(a.keys[a.level(d)])
        vals.append((hi - lo).astype(np.float64))
    keys = np.concatenate(keys) if keys else np.zeros(0, dtype=np.uint64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    order = np.argsort(keys)
    return np.ascontiguousarray(keys[order]), np.ascontiguousarray(vals[order])


@dataclass
class _Plan:
    mode: int
    m: int
    wkeys: np.ndarray
    wvals: np.ndarray


def _plan(spec: OffspringSpec, tree: GWTree | None, n: int, m: int, horizon: str) -> _Plan:
    _check_horizon(horizon)
    if m < 0:
        raise PreconditionError("lookahead must be non-negative")
    empty_k, empty_v = np.zeros(0, dtype=np.uint64), np.zeros(0)
    if spec.is_deterministic:
        return _Plan(MODE_UNIFORM, m, empty_k, empty_v)
    if horizon == "relative":
        return _Plan(MODE_RELATIVE, m, empty_k, empty_v)
    if tree is None:
        raise PreconditionError("absolute horizon needs an explicit tree")
    k, v = spine_weight_table(tree, n, n + m)
    return _Plan(MODE_TABLE, m, k, v)


def _run(spec, root_keys, iic_keys, n, plan, record):
    out = kernels.iic_run(
        np.ascontiguousarray(root_keys, dtype=np.uint64), np.ascontiguousarray(iic_keys, dtype=np.uint64),
        spec.cdf, rng.child_salts(len(spec.cdf)), 1.0 / spec.mean, n, plan.m, plan.mode,
        plan.wkeys, plan.wvals, bool(record), POPULATION_CAP,
    )
    if np.any(out[0] < 0):
        raise AttemptCapError(f"an off-spine cluster exceeded {POPULATION_CAP} vertices")
    return out


def sample_iic(tree: GWTree, n: int, lookahead: int = DEFAULT_LOOKAHEAD, rng_state: int = 0,
               horizon: str = "relative") -> IICSample:
    """One IIC sample to depth ``n`` under the replicate key ``rng_state``."""
    if n < 0:
        raise PreconditionError("depth must be non-negative")
    plan = _plan(tree.spec, tree, n, lookahead, horizon)
    sizes, spines, keys, depths, parents, offsets = _run(
        tree.spec, [tree.root_key], [int(rng_state) & rng.MASK64], n, plan, True
    )
    return IICSample(n, spines[0], keys, depths, parents, int(sizes[0]))


def iic_key(seed: int, index: int) -> int:
    return rng.derive_key(seed, "iic", index)


def spine_step_distribution(tree: GWTree, vertex: int, lookahead: int = DEFAULT_LOOKAHEAD,
                            horizon: str = "relative", n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Child keys of arena vertex ``vertex`` and the spine's probabilities of stepping to each.

    With ``horizon="absolute"`` the horizon is ``n + lookahead``.
    """
    _check_horizon(horizon)
    v = tree.vertex(vertex)
    key = tree.key(vertex)
    cdf, salts = tree.spec.cdf, tree.arena.salts
    K = rng.offspring_count(key, cdf)
    children = [rng.child_key(key, i) for i in range(K)]
    if tree.spec.is_deterministic:
        w = np.ones(K)
    elif horizon == "relative":
        w = np.array([kernels.descendant_count(np.uint64(c), cdf, salts, lookahead) for c in children], dtype=float)
    else:
        if n is None:
            raise PreconditionError("absolute horizon needs n")
        depth = n + lookahead - v.depth - 1
        w = np.array([kernels.descendant_count(np.uint64(c), cdf, salts, depth) for c in children], dtype=float)
    total = w.sum()
    if not total > 0:
        raise PreconditionError(f"vertex {vertex} has zero total child weight")
    return np.array(children, dtype=np.uint64), w / total


# -- exact marginal ------------------------------------------------------------
def _truncated(tree: GWTree, n: int):
    if n > tree.generated_depth:
        raise InsufficientDepthError(f"tree generated to {tree.generated_depth}, need {n}")
    stop = tree.arena.level_start[n + 1]
    return stop, tree.parents()[:stop]


def enumerate_cluster_shapes(tree: GWTree, n: int) -> list[frozenset]:
    """Every root-containing subtree of the depth-``n`` truncation that reaches depth ``n``."""
    stop, _ = _truncated(tree, n)
    a = tree.arena

    def below(v, d):
        # options for the set of kept vertices under v (v kept), as (set, reaches depth n)
        if d == n:
            return [(frozenset([v]), True)]
        opts = [(frozenset([v]), False)]
        for c in range(int(a.first_child[v]), int(a.first_child[v] + a.counts[v])):
            sub = below(c, d + 1)
            new = []
            for base, reach in opts:
                new.append((base, reach))
                for s, r in sub:
                    new.append((base | s, reach or r))
            opts = new
        return opts

    return [s for s, reach in below(0, 0) if reach]


def iic_marginal_exact(tree: GWTree, t, n: int, lookahead: int = DEFAULT_LOOKAHEAD,
                       horizon_depth: int | None = None) -> float:
    """IIC probability that the depth-``n`` truncated cluster equals ``t`` (a set of arena ids).

    Uses ``What(v) = Z_{L-|v|}(v) / mu^{L-|v|}`` with ``L = horizon_depth``
    (default ``n + lookahead``), which obeys the weight recurrence exactly.
    """
    L = n + lookahead if horizon_depth is None else horizon_depth
    if L < n:
        raise PreconditionError("horizon must be at least n")
    if L > tree.generated_depth:
        raise InsufficientDepthError(f"horizon {L} needs the tree generated to depth {L}")
    stop, parents = _truncated(tree, n)
    t = {int(v) for v in t}
    if any(not 0 <= v < stop for v in t):
        raise TreeFormatError(f"shape has vertices outside the depth-{n} truncation of the tree")
    if 0 not in t or any(parents[v] not in t for v in t if v != 0):
        return 0.0
    a = tree.arena
    deep = [v for v in t if v >= a.level_start[n]]
    if not deep:
        return 0.0
    lo, hi = a.descendant_ranges(n, L - n)
    base = a.level_start[n]
    z_v = sum(int(hi[v - base] - lo[v - base]) for v in deep)
    z_root = a.level_size(L)
    pc = 1.0 / tree.mu
    edges = len(t) - 1
    boundary = sum(int(a.counts[v]) for v in t if v < a.level_start[n]) - edges
    return z_v * tree.mu**n / z_root * pc**edges * (1.0 - pc) ** boundary


def restrict_shape(tree: GWTree, t, depth: int) -> frozenset:
    """Vertices of ``t`` at depth ``<= depth``."""
    stop = tree.arena.level_start[depth + 1]
    return frozenset(v for v in t if v < stop)


def sample_shape_frequencies(tree: GWTree, n: int, replicates: int, seed: int,
                             lookahead: int = DEFAULT_LOOKAHEAD, horizon: str = "absolute",
                             threads: int = 1) -> dict[frozenset, int]:
    """Counts of the sampled depth-``n`` cluster shapes (as sets of arena ids)."""
    plan = _plan(tree.spec, tree, n, lookahead, horizon)
    counts: dict[frozenset, int] = {}

    def work(bounds):
        lo, hi = bounds
        ikeys = rng.derive_keys(seed, "iic", lo, hi - lo)
        roots = np.full(hi - lo, tree.root_key, dtype=np.uint64)
        _, _, keys, _, _, offs = _run(tree.spec, roots, ikeys, n, plan, True)
        ids = np.array([tree.index_of(int(k)) for k in keys], dtype=np.int64) if len(keys) else keys
        return [frozenset(ids[offs[i]:offs[i + 1]].tolist()) for i in range(hi - lo)]

    for shapes in ordered_map(work, chunk_ranges(0, replicates, 4096), threads):
        for s in shapes:
            counts[s] = counts.get(s, 0) + 1
    return counts


# -- size law ----------------------------------------------------------------
@dataclass(frozen=True)
class IICExperiment:
    n: int
    lookahead: int
    horizon: str
    lam: float
    c_n: np.ndarray = field(repr=False)
    summary: EmpiricalSummary
    ks: float

    @property
    def scaled(self) -> np.ndarray:
        return self.c_n / self.n

    @property
    def mean_ratio(self) -> float:
        """Sample mean of ``C_n / n`` divided by ``2 / lambda``."""
        return self.summary.mean * self.lam / 2.0

    def as_dict(self) -> dict:
        return {
            "n": self.n, "lookahead": self.lookahead, "horizon": self.horizon, "lambda": self.lam,
            "ks_gamma2": self.ks, "mean_ratio": self.mean_ratio, **self.summary.as_dict(),
        }


def _experiment(spec, n, replicates, seed, lookahead, horizon, threads, root_key_fn, tree):
    if replicates < MIN_REPLICATES:
        raise PreconditionError(f"need at least {MIN_REPLICATES} replicates, got {replicates}")
    if n < 1:
        raise PreconditionError("n must be positive")
    plan = _plan(spec, tree, n, lookahead, horizon)

    def work(bounds):
        lo, hi = bounds
        ikeys = rng.derive_keys(seed, "iic", lo, hi - lo)
        return _run(spec, root_key_fn(lo, hi), ikeys, n, plan, False)[0]

    c_n = np.concatenate(list(ordered_map(work, chunk_ranges(0, replicates, CHUNK), threads)))
    if np.any(c_n < 1):
        raise AssertionError("an IIC sample failed to reach depth n")
    lam = derive_params(spec).lam
    scaled = c_n / n
    return IICExperiment(n, lookahead, horizon, lam, c_n, EmpiricalSummary.of(scaled),
                         ks_distance(scaled, gamma2_cdf(lam)))


def iic_size_experiment(tree: GWTree, n: int, replicates: int, seed: int,
                        lookahead: int = DEFAULT_LOOKAHEAD, horizon: str = "relative",
                        threads: int = 1) -> IICExperiment:
    """``C_n / n`` over independent IIC samples on the same fixed tree."""
    root = tree.root_key
    return _experiment(tree.spec, n, replicates, seed, lookahead, horizon, threads,
                       lambda lo, hi: np.full(hi - lo, root, dtype=np.uint64), tree)


def lookahead_sensitivity(tree: GWTree, lookaheads=(10, 15, 20), steps: int = 8, seed: int = 0) -> list[dict]:
    """Spine step probabilities under several lookaheads along one reference spine.

    The reference spine is sampled with the largest lookahead.  For each step
    the report gives the total-variation distance between each lookahead's
    step distribution and the largest one's.
    """
    lookaheads = sorted(lookaheads)
    ref = lookaheads[-1]
    u_key = tree.root_key
    rows = []
    cdf, salts = tree.spec.cdf, tree.arena.salts
    for d in range(steps):
        K = rng.offspring_count(u_key, cdf)
        children = [rng.child_key(u_key, i) for i in range(K)]
        dists = {}
        for m in lookaheads:
            w = np.array([kernels.descendant_count(np.uint64(c), cdf, salts, m) for c in children], dtype=float)
            dists[m] = w / w.sum()
        rows.append({
            "step": d,
            "children": K,
            "probabilities": {m: dists[m].tolist() for m in lookaheads},
            "tv_to_reference": {m: 0.5 * float(np.abs(dists[m] - dists[ref]).sum()) for m in lookaheads},
        })
        u = rng.stream_unit(rng.derive_key(seed, "sensitivity", 0), d)
        choice = min(int(np.searchsorted(np.cumsum(dists[ref]), u, side="right")), K - 1)
        u_key = children[choice]
    return rows


def tv_distance(freqs: dict, exact: dict) -> float:
    """Total variation between sample counts and an exact law over the same shapes."""
    total = sum(freqs.values())
    keys = set(freqs) | set(exact)
    return 0.5 * math.fsum(abs(freqs.get(k, 0) / total - exact.get(k, 0.0)) for k in keys)
