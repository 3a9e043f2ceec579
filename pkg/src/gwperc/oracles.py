"""Brute-force reference computations by full edge-configuration enumeration.

Only usable on tiny trees (``2**edges`` configurations), which is exactly
what they are for: checking the dynamic programs and samplers.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import PreconditionError
from .tree import GWTree

MAX_EDGES = 22


def truncated_edges(tree: GWTree, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices to depth ``n`` and their parents (root first, parent -1)."""
    if n > tree.generated_depth:
        raise PreconditionError(f"tree generated to {tree.generated_depth}, need {n}")
    stop = tree.arena.level_start[n + 1]
    return np.arange(stop), tree.parents()[:stop]


def configurations(num_edges: int) -> np.ndarray:
    """All ``2**num_edges`` open/closed patterns as a boolean matrix."""
    if num_edges > MAX_EDGES:
        raise PreconditionError(f"{num_edges} edges is too many to enumerate")
    codes = np.arange(1 << num_edges, dtype=np.int64)
    return ((codes[:, None] >> np.arange(num_edges)) & 1).astype(bool)


def connected_matrix(parents: np.ndarray, open_edges: np.ndarray) -> np.ndarray:
    """``conn[c, v]``: vertex ``v`` joined to the root in configuration ``c``.

    Edge ``e`` of ``open_edges`` is the edge into vertex ``e + 1``; vertices
    must be listed parents-first.
    """
    n_conf = open_edges.shape[0]
    conn = np.zeros((n_conf, len(parents)), dtype=bool)
    conn[:, 0] = True
    for v in range(1, len(parents)):
        conn[:, v] = conn[:, parents[v]] & open_edges[:, v - 1]
    return conn


def configuration_weights(open_edges: np.ndarray, pc: float) -> np.ndarray:
    k = open_edges.sum(axis=1)
    e = open_edges.shape[1]
    return pc**k * (1.0 - pc) ** (e - k)


def brute_force_moments(tree: GWTree, n: int, k_max: int) -> np.ndarray:
    """``E_T[binom(|Y_n|, i)]`` for ``i = 0..k_max`` by enumeration."""
    _, parents = truncated_edges(tree, n)
    conf = configurations(len(parents) - 1)
    conn = connected_matrix(parents, conf)
    w = configuration_weights(conf, 1.0 / tree.mu)
    sizes = conn[:, tree.arena.level(n)].sum(axis=1)
    top = int(sizes.max())
    out = []
    for i in range(k_max + 1):
        table = np.array([math.comb(s, i) for s in range(top + 1)], dtype=np.float64)
        out.append(math.fsum(w * table[sizes]))
    return np.array(out)


def brute_force_survival(tree: GWTree, n: int) -> float:
    _, parents = truncated_edges(tree, n)
    conf = configurations(len(parents) - 1)
    conn = connected_matrix(parents, conf)
    w = configuration_weights(conf, 1.0 / tree.mu)
    return math.fsum(w[conn[:, tree.arena.level(n)].any(axis=1)])
