"""Pure-Python implementations of the hot kernels.

These define the semantics; ``_kernels.pyx`` mirrors them line for line and
must return identical results.  All trees are explored lazily through the
path-keyed streams of :mod:`gwperc.rng`.

Conventions shared by every kernel
----------------------------------
``cdf``    offspring CDF, ``cdf[k] = P[Z <= k]``, last entry exactly 1
``salts``  ``rng.child_salts(len(cdf))``
``pc``     edge retention probability
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .rng import MASK64, SALT_OFFSPRING, edge_open, mix64, stream_unit, unit

MODE_UNIFORM = 0
MODE_RELATIVE = 1
MODE_TABLE = 2


def _offspring(key, cdf):
    return bisect_right(cdf, unit(mix64(key ^ SALT_OFFSPRING)))


def _grow(start, perc_key, steps, cdf, salts, pc, cap):
    """Open cluster of ``start`` after ``steps`` levels; returns (size, levels survived)."""
    cur = [start]
    for step in range(steps):
        nxt = []
        for key in cur:
            for i in range(_offspring(key, cdf)):
                ck = mix64(key ^ int(salts[i]))
                if unit(mix64(perc_key ^ ck)) < pc:
                    nxt.append(ck)
        if not nxt:
            return 0, step
        if len(nxt) > cap:
            return -1, step
        cur = nxt
    return len(cur), steps


def cluster_sizes(root_keys, perc_keys, cdf, salts, pc, n, cap):
    """``|Y_n|`` and the deepest level reached, one entry per replicate.

    A size of -1 marks a replicate whose level population exceeded ``cap``.
    """
    cdf = list(map(float, cdf))
    sizes = np.zeros(len(perc_keys), dtype=np.int64)
    reach = np.zeros(len(perc_keys), dtype=np.int64)
    for r in range(len(perc_keys)):
        sizes[r], reach[r] = _grow(int(root_keys[r]), int(perc_keys[r]), n, cdf, salts, pc, cap)
    return sizes, reach


def cluster_detail(root_key, perc_key, cdf, salts, pc, n, m):
    """Keys of ``Y_n`` and the number of distinct depth-``m`` ancestors among them."""
    cdf = list(map(float, cdf))
    cur = [int(root_key)]
    labels = [0]
    for depth in range(n):
        nxt, nlab = [], []
        for key, lab in zip(cur, labels):
            for i in range(_offspring(key, cdf)):
                ck = mix64(key ^ int(salts[i]))
                if unit(mix64(perc_key ^ ck)) < pc:
                    nxt.append(ck)
                    nlab.append(lab)
        cur, labels = nxt, nlab
        if not cur:
            break
        if depth + 1 == m:
            labels = list(range(len(cur)))
    branches = len(set(labels)) if cur else 0
    return np.array(cur, dtype=np.uint64), branches


def descendant_count(key, cdf, salts, depth):
    """``Z_depth`` of the subtree rooted at ``key``."""
    cdf = list(map(float, cdf))
    total = 0
    stack = [(int(key), 0)]
    while stack:
        k, d = stack.pop()
        if d == depth:
            total += 1
            continue
        for i in range(_offspring(k, cdf)):
            stack.append((mix64(k ^ int(salts[i])), d + 1))
    return total


def _table_weight(wkeys, wvals, key):
    pos = int(np.searchsorted(wkeys, np.uint64(key)))
    if pos >= len(wkeys) or int(wkeys[pos]) != key:
        raise KeyError(f"no spine weight for vertex {key:#x}")
    return float(wvals[pos])


def _grow_record(start, parent_index, depth, perc_key, steps, cdf, salts, pc, rec):
    keys, depths, parents = rec
    cur = [(start, parent_index)]
    for step in range(steps + 1):
        idx = []
        for key, par in cur:
            idx.append((key, len(keys)))
            keys.append(key)
            depths.append(depth + step)
            parents.append(par)
        if step == steps:
            return len(cur)
        nxt = []
        for key, me in idx:
            for i in range(_offspring(key, cdf)):
                ck = mix64(key ^ int(salts[i]))
                if unit(mix64(perc_key ^ ck)) < pc:
                    nxt.append((ck, me))
        if not nxt:
            return 0
        cur = nxt
    return 0


def iic_run(root_keys, iic_keys, cdf, salts, pc, n, m, mode, wkeys, wvals, record, cap):
    """Sample incipient-infinite-cluster replicates to depth ``n``.

    The spine moves from ``u`` to child ``w`` with probability proportional to
    a weight: uniform (``MODE_UNIFORM``), the lazily counted ``Z_m(w)``
    (``MODE_RELATIVE``) or a precomputed per-vertex table (``MODE_TABLE``).
    Spine edges are forced open; every other edge is open with probability
    ``pc`` under the replicate key.  Returns ``(c_n, spines, keys, depths,
    parents, offsets)``; the last five are empty unless ``record``.
    """
    cdf = list(map(float, cdf))
    R = len(iic_keys)
    sizes = np.zeros(R, dtype=np.int64)
    spines = np.zeros((R if record else 0, n + 1), dtype=np.uint64)
    keys, depths, parents = [], [], []
    offsets = [0]
    for r in range(R):
        ikey = int(iic_keys[r])
        u = int(root_keys[r])
        total = 1
        spine_index = len(keys)
        if record:
            spines[r, 0] = u
            keys.append(u)
            depths.append(0)
            parents.append(-1)
        for d in range(n):
            K = _offspring(u, cdf)
            children = [mix64(u ^ int(salts[i])) for i in range(K)]
            if K == 1:
                choice = 0
            else:
                if mode == MODE_UNIFORM:
                    weights = [1.0] * K
                elif mode == MODE_RELATIVE:
                    weights = [float(descendant_count(c, cdf, salts, m)) for c in children]
                else:
                    weights = [_table_weight(wkeys, wvals, c) for c in children]
                target = stream_unit(ikey, d) * sum(weights)
                acc = 0.0
                choice = K - 1
                for i, w in enumerate(weights):
                    acc += w
                    if acc > target:
                        choice = i
                        break
            for i, ck in enumerate(children):
                if i == choice or not edge_open(ikey, ck, pc):
                    continue
                if record:
                    got = _grow_record(
                        ck, spine_index, d + 1, ikey, n - d - 1, cdf, salts, pc,
                        (keys, depths, parents),
                    )
                else:
                    got, _ = _grow(ck, ikey, n - d - 1, cdf, salts, pc, cap)
                    if got < 0:
                        total = -1
                        break
                total += got
            if total < 0:
                break
            u = children[choice]
            if record:
                spines[r, d + 1] = u
                keys.append(u)
                depths.append(d + 1)
                parents.append(spine_index)
                spine_index = len(keys) - 1
        sizes[r] = total
        offsets.append(len(keys))
    return (
        sizes,
        spines,
        np.array(keys, dtype=np.uint64),
        np.array(depths, dtype=np.int32),
        np.array(parents, dtype=np.int64),
        np.array(offsets if record else [0], dtype=np.int64),
    )
