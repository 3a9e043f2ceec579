"""Seeded Galton-Watson trees stored as breadth-first level arenas.

A vertex's offspring count is a function of its path key only (see
:mod:`gwperc.rng`), so a tree is fully determined by ``(spec, master_seed)``
and can be extended level by level, or explored lazily far below the
explicit arena, without ever changing a previously drawn count.

Within a level, vertices are stored in breadth-first order, so the
descendants of any vertex at any later depth occupy one contiguous range.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DepthBudgetError, InsufficientDepthError, PreconditionError, TreeFormatError
from .offspring import OffspringSpec, parse_spec

DEFAULT_MAX_VERTICES = 1 << 23
MAGIC = "gwtree"
FORMAT_VERSION = "v1"


class Arena:
    """Breadth-first levels of a forest (one or more roots).

    ``keys`` holds every vertex's path key; ``counts[i]`` and
    ``first_child[i]`` are defined for vertices above the last level.
    """

    def __init__(self, root_keys: np.ndarray, cdf: np.ndarray):
        self.cdf = np.ascontiguousarray(cdf, dtype=np.float64)
        self.salts = rng.child_salts(len(self.cdf))
        self.keys = np.ascontiguousarray(root_keys, dtype=np.uint64)
        self.counts = np.zeros(0, dtype=np.int64)
        self.first_child = np.zeros(0, dtype=np.int64)
        self.level_start = [0, len(self.keys)]

    @property
    def depth(self) -> int:
        return len(self.level_start) - 2

    @property
    def size(self) -> int:
        return self.level_start[-1]

    def level(self, d: int) -> slice:
        return slice(self.level_start[d], self.level_start[d + 1])

    def level_size(self, d: int) -> int:
        return self.level_start[d + 1] - self.level_start[d]

    def grow(self, depth: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> None:
        while self.depth < depth:
            last = self.keys[self.level(self.depth)]
            counts = rng.offspring_counts(last, self.cdf)
            total = int(counts.sum())
            if self.size + total > max_vertices:
                raise DepthBudgetError(self.depth + 1, self.size + total, max_vertices)
            starts = np.cumsum(counts) - counts
            ranks = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
            parents = np.repeat(last, counts)
            children = rng.mix64_array(parents ^ self.salts[ranks])
            self.counts = np.concatenate([self.counts, counts.astype(np.int64)])
            self.first_child = np.concatenate([self.first_child, self.size + starts])
            self.keys = np.concatenate([self.keys, children])
            self.level_start.append(self.size + total)

    def descendant_ranges(self, d: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Index ranges ``[lo, hi)`` of the depth ``d + m`` descendants of each depth-``d`` vertex."""
        if d + m > self.depth:
            raise InsufficientDepthError(f"need depth {d + m}, arena has {self.depth}")
        lo = np.arange(self.level_start[d], self.level_start[d + 1], dtype=np.int64)
        hi = lo + 1
        for _ in range(m):
            empty = lo == hi
            new_lo = self.first_child[np.minimum(lo, len(self.first_child) - 1)]
            last = hi - 1
            new_hi = self.first_child[last] + self.counts[last]
            lo = np.where(empty, 0, new_lo)
            hi = np.where(empty, 0, new_hi)
        return lo, hi


@dataclass(frozen=True)
class VertexRef:
    id: int
    depth: int


class GWTree:
    """A single Galton-Watson tree, explicit to ``generated_depth``."""

    def __init__(self, spec: OffspringSpec, master_seed: int, max_vertices: int = DEFAULT_MAX_VERTICES):
        self.spec = spec
        self.master_seed = int(master_seed)
        self.max_vertices = max_vertices
        self.root_key = rng.derive_key(self.master_seed, "tree", 0)
        self.arena = Arena(np.array([self.root_key], dtype=np.uint64), spec.cdf)
        self._index = None

    # -- generation -----------------------------------------------------
    @property
    def generated_depth(self) -> int:
        return self.arena.depth

    def deepen(self, new_depth: int) -> "GWTree":
        if new_depth <= self.generated_depth:
            raise PreconditionError(
                f"deepen to {new_depth} requested but tree is already at depth {self.generated_depth}"
            )
        self.arena.grow(new_depth, self.max_vertices)
        self._index = None
        return self

    # -- bookkeeping ----------------------------------------------------
    @property
    def mu(self) -> float:
        return self.spec.mean

    @property
    def z(self) -> np.ndarray:
        return np.diff(np.array(self.arena.level_start, dtype=np.int64))

    @property
    def w(self) -> np.ndarray:
        return self.z / self.mu ** np.arange(self.generated_depth + 1)

    @property
    def w_bar(self) -> float:
        return float(self.w.max())

    @property
    def size(self) -> int:
        return self.arena.size

    @property
    def num_edges(self) -> int:
        return self.arena.size - 1

    def level(self, d: int) -> range:
        return range(self.arena.level_start[d], self.arena.level_start[d + 1])

    def vertex(self, i: int) -> VertexRef:
        if not 0 <= i < self.size:
            raise IndexError(f"vertex {i} outside arena of {self.size}")
        d = int(np.searchsorted(self.arena.level_start, i, side="right")) - 1
        return VertexRef(i, d)

    def children(self, i: int) -> range:
        a = self.arena
        if i >= len(a.counts):
            raise InsufficientDepthError(f"children of vertex {i} are beyond the generated depth")
        return range(int(a.first_child[i]), int(a.first_child[i] + a.counts[i]))

    def parents(self) -> np.ndarray:
        """Parent index of every vertex (-1 for the root)."""
        a = self.arena
        par = np.full(a.size, -1, dtype=np.int64)
        par[1:] = np.repeat(np.arange(len(a.counts)), a.counts)
        return par

    def key(self, i: int) -> int:
        return int(self.arena.keys[i])

    def index_of(self, key: int) -> int:
        """Arena index of the vertex with path ``key`` (KeyError if not generated)."""
        if self._index is None:
            order = np.argsort(self.arena.keys, kind="stable")
            self._index = (self.arena.keys[order], order)
        sorted_keys, order = self._index
        pos = int(np.searchsorted(sorted_keys, np.uint64(key)))
        if pos >= len(sorted_keys) or int(sorted_keys[pos]) != int(key):
            raise KeyError(f"vertex {int(key):#x} is not in the generated arena")
        return int(order[pos])

    def descendant_count(self, v: VertexRef | int, m: int) -> int:
        v = v if isinstance(v, VertexRef) else self.vertex(v)
        if v.depth + m > self.generated_depth:
            raise InsufficientDepthError(
                f"lookahead {m} below depth {v.depth} needs depth {v.depth + m}, "
                f"tree has {self.generated_depth}"
            )
        lo, hi = self.arena.descendant_ranges(v.depth, m)
        j = v.id - self.arena.level_start[v.depth]
        return int(hi[j] - lo[j])

    def structural_audit(self) -> None:
        """Raise AssertionError if level bookkeeping is inconsistent."""
        a = self.arena
        starts = np.array(a.level_start)
        if starts[0] != 0 or starts[-1] != len(a.keys) or np.any(np.diff(starts) <= 0):
            raise AssertionError("level ranges do not partition the arena")
        for d in range(self.generated_depth):
            sl = a.level(d)
            if int(a.counts[sl].sum()) != a.level_size(d + 1):
                raise AssertionError(f"Z_{d + 1} differs from the child counts at depth {d}")
        if not np.array_equal(a.counts, rng.offspring_counts(a.keys[: len(a.counts)], a.cdf)):
            raise AssertionError("stored child counts differ from the seeded streams")

    def same_arena(self, other: "GWTree") -> bool:
        return (
            self.spec == other.spec
            and self.master_seed == other.master_seed
            and np.array_equal(self.arena.keys, other.arena.keys)
            and np.array_equal(self.arena.counts, other.arena.counts)
            and self.arena.level_start == other.arena.level_start
        )

    def __repr__(self) -> str:
        return (
            f"GWTree({self.spec.name}, seed={self.master_seed}, depth={self.generated_depth}, "
            f"vertices={self.size})"
        )


def generate(spec: OffspringSpec, master_seed: int, depth: int,
             max_vertices: int = DEFAULT_MAX_VERTICES) -> GWTree:
    if depth < 0:
        raise PreconditionError("depth must be non-negative")
    tree = GWTree(spec, master_seed, max_vertices)
    tree.arena.grow(depth, max_vertices)
    return tree


def deepen(tree: GWTree, new_depth: int) -> GWTree:
    return tree.deepen(new_depth)


def w_estimate(tree: GWTree, v: VertexRef | int, m: int) -> float:
    """``W_m(v) = Z_m(v) / mu^m``, the lookahead-``m`` estimate of ``W(v)``."""
    return tree.descendant_count(v, m) / tree.mu**m


# -- serialization -------------------------------------------------------
def serialize(tree: GWTree) -> bytes:
    buf = io.StringIO()
    buf.write(f"{MAGIC} {FORMAT_VERSION} {tree.spec.name} {tree.master_seed} {tree.generated_depth}\n")
    a = tree.arena
    for d in range(tree.generated_depth):
        buf.write(" ".join(map(str, a.counts[a.level(d)].tolist())))
        buf.write("\n")
    buf.write(f"sum {tree.size}\n")
    return buf.getvalue().encode("ascii")


def deserialize(data: bytes, max_vertices: int = DEFAULT_MAX_VERTICES) -> GWTree:
    try:
        lines = data.decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise TreeFormatError(f"tree file is not ASCII: {exc}") from None
    if not lines:
        raise TreeFormatError("empty tree file")
    header = lines[0].split()
    if len(header) != 5 or header[0] != MAGIC:
        raise TreeFormatError(f"bad header {lines[0]!r}: expected '{MAGIC} {FORMAT_VERSION} <spec> <seed> <depth>'")
    if header[1] != FORMAT_VERSION:
        raise TreeFormatError(f"unsupported format version {header[1]!r}")
    try:
        spec = parse_spec(header[2])
        seed, depth = int(header[3]), int(header[4])
    except ValueError as exc:
        raise TreeFormatError(f"bad header {lines[0]!r}: {exc}") from None
    if len(lines) != depth + 2:
        raise TreeFormatError(f"expected {depth} level lines and a checksum, got {len(lines) - 1} lines")
    tree = GWTree(spec, seed, max_vertices)
    expected = 1
    for d in range(depth):
        try:
            counts = np.array(lines[1 + d].split(), dtype=np.int64)
        except ValueError:
            raise TreeFormatError(f"level {d}: non-integer child count") from None
        if len(counts) != expected:
            raise TreeFormatError(f"level {d}: expected {expected} counts, found {len(counts)} (truncated?)")
        tree.arena.grow(d + 1, max_vertices)
        if not np.array_equal(counts, tree.arena.counts[tree.arena.level(d)]):
            raise TreeFormatError(f"level {d}: counts do not match the seeded tree {spec.name}/{seed}")
        expected = int(counts.sum())
    tail = lines[-1].split()
    if len(tail) != 2 or tail[0] != "sum" or tail[1] != str(tree.size):
        raise TreeFormatError(f"checksum line {lines[-1]!r} does not match {tree.size} vertices")
    return tree


def save(tree: GWTree, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(tree))


def load(path, max_vertices: int = DEFAULT_MAX_VERTICES) -> GWTree:
    with open(path, "rb") as fh:
        return deserialize(fh.read(), max_vertices)
