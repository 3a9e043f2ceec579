"""Bottom-up dynamic programs over a level arena.

Every exact quenched quantity here has the form "value at a vertex with
``r`` levels still to go", with a fixed leaf value at ``r = 0`` and a
product-type combination over children for ``r > 0``.  The engine computes
these for a block of root depths ``j0 <= j < j1`` at once: at arena level
``d`` only ``r`` in ``[max(j0 - d, 0), j1 - d)`` is needed, so memory is
bounded by ``(largest level) x (block width)`` whatever the target depth.

Levels below the explicit arena are closed with the tree-averaged (annealed)
value of an independent subtree.  Because each recursion is affine in every
individual child's value and distinct children have independent subtrees,
the closed computation returns exactly ``E[value | explicit levels]``.
For deterministic offspring laws the closure is therefore exact.
"""

from __future__ import annotations

import math

import numpy as np

from .tree import Arena

BLOCK_BYTES = 192 * 2**20


class SurvivalAlgebra:
    """``q`` with ``q_v(r) = 1 - prod_w (1 - pc q_w(r - 1))`` and ``q(0) = 1``."""

    width = 1

    def __init__(self, pmf: np.ndarray, pc: float):
        self.pmf = np.asarray(pmf, dtype=np.float64)
        self.pc = pc
        self._log1m = math.log1p(-pc)

    def leaf(self, shape):
        return np.ones(shape + (1,))

    def frontier(self, r_max: int) -> np.ndarray:
        """Annealed survival ``q~_r`` for ``r = 0..r_max``."""
        out = np.empty((r_max + 1, 1))
        out[0] = 1.0
        ks = np.arange(len(self.pmf))
        nz = self.pmf > 0
        ks, ps = ks[nz], self.pmf[nz]
        q = 1.0
        for r in range(1, r_max + 1):
            q = float(np.dot(ps, -np.expm1(ks * math.log1p(-self.pc * q))))
            out[r] = q
        return out

    def combine(self, child_vals, seg_starts, counts):
        logs = np.log1p(-self.pc * child_vals)
        if len(child_vals) == 0:
            return np.zeros((len(counts),) + child_vals.shape[1:])
        summed = np.add.reduceat(logs, seg_starts, axis=0)
        summed[counts == 0] = 0.0
        out = -np.expm1(summed)
        # one child: pc * q exactly, matching the first-moment recursion bit for bit
        single = counts == 1
        out[single] = self.pc * child_vals[seg_starts[single]]
        return out

    def combine_identical(self, value, counts):
        # value: (W, 1) shared by every child; counts: (N,)
        lg = np.log1p(-self.pc * value)
        out = -np.expm1(counts[:, None, None] * lg[None, :, :])
        out[counts == 1] = self.pc * value
        return out


def poly_mul(a, b, width):
    """Product of truncated polynomials along the last axis."""
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for i in range(width):
        out[..., i:] += a[..., i : i + 1] * b[..., : width - i]
    return out


class MomentAlgebra:
    """Truncated ``E[(1 + x)^{|Y|}]``, whose coefficients are ``E[binom(|Y|, i)]``."""

    def __init__(self, pmf: np.ndarray, pc: float, k: int):
        self.pmf = np.asarray(pmf, dtype=np.float64)
        self.pc = pc
        self.width = k + 1
        m = [math.fsum(p * math.comb(z, i) for z, p in enumerate(self.pmf) if p) for i in range(self.width)]
        self.m = np.array(m)

    def leaf(self, shape):
        out = np.zeros(shape + (self.width,))
        out[..., 0] = 1.0
        if self.width > 1:
            out[..., 1] = 1.0
        return out

    def _lift(self, p):
        g = self.pc * p
        g[..., 0] += 1.0 - self.pc
        return g

    def frontier(self, r_max: int) -> np.ndarray:
        # H_r = sum_i m_i pc^i (H_{r-1} - 1)^i, truncated
        out = np.empty((r_max + 1, self.width))
        out[0] = self.leaf(())
        for r in range(1, r_max + 1):
            h = out[r - 1].copy()
            h[0] -= 1.0
            acc = np.zeros(self.width)
            acc[0] = 1.0
            power = np.zeros(self.width)
            power[0] = 1.0
            for i in range(1, self.width):
                power = poly_mul(power, h, self.width)
                acc += self.m[i] * self.pc**i * power
            out[r] = acc
        return out

    def combine(self, child_vals, seg_starts, counts):
        n = len(counts)
        out = self.leaf((n,) + child_vals.shape[1:-1])
        out[..., 1:] = 0.0
        g = self._lift(child_vals)
        for rank in range(int(counts.max(initial=0))):
            has = counts > rank
            out[has] = poly_mul(out[has], g[seg_starts[has] + rank], self.width)
        return out

    def combine_identical(self, value, counts):
        g = self._lift(value)
        out = np.zeros((len(counts),) + value.shape)
        for c in np.unique(counts):
            p = np.zeros(value.shape)
            p[..., 0] = 1.0
            for _ in range(int(c)):
                p = poly_mul(p, g, self.width)
            out[counts == c] = p
        return out


def _block_width(arena: Arena, algebra, stop_level: int) -> int:
    biggest = max(arena.level_size(d) for d in range(stop_level, arena.depth + 1))
    per_column = biggest * algebra.width * 8 * 6
    return max(1, BLOCK_BYTES // max(per_column, 1))


def run_block(arena: Arena, algebra, j0: int, j1: int, frontier: np.ndarray, stop_level: int = 0):
    """Values at level ``stop_level`` for root depths ``j0 <= j < j1``.

    Returns an array of shape ``(N, j1 - j0, width)`` whose column ``c`` holds
    the value with ``j0 + c - stop_level`` levels to go (zeros where that is
    negative).
    """
    D = arena.depth
    s = stop_level
    W = j1 - j0

    def window(d):
        return max(j0 - d, 0), max(j1 - d, 0)

    if D == s:
        lo, hi = window(s)
        vals = np.broadcast_to(frontier[lo:hi][None], (arena.level_size(s), hi - lo, algebra.width))
        return _align(vals, j0, j1, s)
    if j1 <= s:
        return np.zeros((arena.level_size(s), W, algebra.width))

    d_top = min(D - 1, j1 - 1)
    vals = None  # values at level d + 1, columns for r in window(d + 1)
    for d in range(d_top, s - 1, -1):
        lo, hi = window(d)
        n = arena.level_size(d)
        cur = np.zeros((n, hi - lo, algebra.width))
        if hi > lo:
            r = np.arange(lo, hi)
            leaf_cols = r == 0
            if leaf_cols.any():
                cur[:, leaf_cols] = algebra.leaf((n, int(leaf_cols.sum())))
            inner = ~leaf_cols
            if inner.any():
                sl = arena.level(d)
                counts = arena.counts[sl]
                rr = r[inner] - 1
                if d == D - 1:
                    cur[:, inner] = algebra.combine_identical(frontier[rr], counts)
                else:
                    clo, _ = window(d + 1)
                    child = vals[:, rr - clo]
                    starts = arena.first_child[sl] - arena.level_start[d + 1]
                    cur[:, inner] = algebra.combine(child, starts, counts)
        vals = cur
    return _align(vals, j0, j1, s)


def _align(vals, j0, j1, s):
    lo = max(j0 - s, 0)
    hi = max(j1 - s, 0)
    out = np.zeros((vals.shape[0], j1 - j0, vals.shape[2]))
    if hi > lo:
        # r = j - s, column of j is j - j0
        out[:, lo + s - j0 : hi + s - j0] = vals[:, : hi - lo]
    return out


def run(arena: Arena, algebra, j_max: int, stop_level: int = 0, j_min: int = 0) -> np.ndarray:
    """Values at ``stop_level`` for every root depth ``j_min <= j <= j_max``."""
    frontier = algebra.frontier(max(j_max - arena.depth, 0) + 1)
    width = _block_width(arena, algebra, stop_level)
    parts = []
    j = j_min
    while j <= j_max:
        j1 = min(j + width, j_max + 1)
        parts.append(run_block(arena, algebra, j, j1, frontier, stop_level))
        j = j1
    return np.concatenate(parts, axis=1)
