from __future__ import annotations

import math

import numpy as np
import pytest

from gwperc import _backend, rng
from gwperc.errors import DepthBudgetError, InsufficientDepthError, PreconditionError, TreeFormatError
from gwperc.offspring import parse_spec
from gwperc.tree import Arena, deepen, deserialize, generate, load, save, serialize, w_estimate


def replay_level_sizes(spec, seed, depth):
    """Independent breadth-first replay of the seeded streams, one vertex at a time."""
    level = [rng.derive_key(seed, "tree", 0)]
    sizes = [1]
    for _ in range(depth):
        nxt = []
        for key in level:
            for i in range(rng.offspring_count(key, spec.cdf)):
                nxt.append(rng.mix64(key ^ rng.mix64(rng.SALT_CHILD + i)))
        level = nxt
        sizes.append(len(level))
    return sizes


def test_det2_depth3(det2):
    t = generate(det2, 123, 3)
    assert t.z[3] == 8 and t.w[3] == 1.0


def test_unif_w5_matches_replay(unif13):
    t = generate(unif13, 42, 5)
    sizes = replay_level_sizes(unif13, 42, 5)
    assert t.z.tolist() == sizes
    assert t.w[5] == sizes[5] / 32


@pytest.mark.parametrize("name", ["det:2", "unif:1:3", "geom:0.5", "pmf:0.2,0.3,0.5"])
def test_deepen_equals_direct(name):
    spec = parse_spec(name)
    a = generate(spec, 9, 4)
    deepen(a, 6)
    assert a.same_arena(generate(spec, 9, 6))


def test_det3_deepen():
    t = generate(parse_spec("det:3"), 0, 2)
    t.deepen(4)
    assert t.z[4] == 81


def test_deepen_seed7(unif13):
    t = generate(unif13, 7, 3).deepen(5)
    assert t.z[5] == generate(unif13, 7, 5).z[5]


def test_deepen_same_depth_rejected(unif13):
    t = generate(unif13, 7, 3)
    with pytest.raises(PreconditionError):
        t.deepen(3)


def test_regeneration_is_identical(unif13):
    assert generate(unif13, 5, 7).same_arena(generate(unif13, 5, 7))


def test_budget_error_names_depth():
    with pytest.raises(DepthBudgetError) as info:
        generate(parse_spec("det:2"), 0, 12, max_vertices=1000)
    assert info.value.depth == 9


def test_w_estimate_det(det2):
    t = generate(det2, 0, 8)
    for v in (0, 1, 5, 20):
        assert w_estimate(t, v, 8 - t.vertex(v).depth) == 1.0


def test_w_estimate_root_is_w_n(unif13):
    t = generate(unif13, 3, 9)
    assert w_estimate(t, 0, 9) == t.w[9]


def test_w_estimate_depth_guard(unif13):
    t = generate(unif13, 3, 5)
    with pytest.raises(InsufficientDepthError):
        w_estimate(t, 1, 5)


def test_descendant_count_matches_lazy_kernel(unif13):
    t = generate(unif13, 11, 9)
    for v in list(t.level(2)):
        got = t.descendant_count(v, 7)
        lazy = _backend.kernels.descendant_count(np.uint64(t.key(v)), unif13.cdf, t.arena.salts, 7)
        assert got == lazy


def test_structural_audit_and_partition(unif13):
    for seed in range(20):
        t = generate(unif13, seed, 7)
        t.structural_audit()
        starts = t.arena.level_start
        assert starts[0] == 0 and starts[-1] == t.size
        assert np.allclose(t.w, t.z / 2.0 ** np.arange(8), rtol=0, atol=1e-12)
        assert t.w_bar == t.w.max()


def test_mean_w8_is_one(unif13):
    roots = rng.derive_keys(2024, "w8", 0, 10_000)
    forest = Arena(roots, unif13.cdf)
    forest.grow(8, max_vertices=1 << 30)
    # level 8 vertices grouped by their root
    owner = np.arange(10_000)
    for d in range(8):
        owner = np.repeat(owner, forest.counts[forest.level(d)])
    w8 = np.bincount(owner, minlength=10_000) / 2.0**8
    se = w8.std(ddof=1) / math.sqrt(len(w8))
    assert abs(w8.mean() - 1.0) < 3 * se


def test_w_estimate_lookahead_convergence(unif13):
    """``|W_10(v) - W_20(v)|`` for a depth-2 vertex stays inside ``3 sd(W) / mu^5``."""
    sd_w = math.sqrt(unif13.factorial_moment(2) * 2 + 2 - 4) / math.sqrt(2)  # Var Z / (mu^2 - mu)
    bound = 3 * sd_w / 2**5
    cdf, salts = unif13.cdf, rng.child_salts(len(unif13.cdf))
    diffs = []
    for seed in range(1000):
        t = generate(unif13, seed, 2)
        key = np.uint64(t.key(t.arena.level_start[2]))
        w10 = _backend.kernels.descendant_count(key, cdf, salts, 10) / 2**10
        w20 = _backend.kernels.descendant_count(key, cdf, salts, 20) / 2**20
        diffs.append(abs(w10 - w20))
    diffs = np.array(diffs)
    assert np.mean(diffs > bound) < 0.01
    assert math.sqrt(np.mean(diffs**2)) < bound / 2


def test_round_trip(unif13, tmp_path):
    t = generate(unif13, 42, 5)
    data = serialize(t)
    back = deserialize(data)
    assert back.same_arena(t) and serialize(back) == data
    save(t, tmp_path / "t.gw")
    assert load(tmp_path / "t.gw").same_arena(t)


def test_deserialized_deepens_identically(unif13):
    t = generate(unif13, 42, 5)
    back = deserialize(serialize(t))
    assert back.deepen(8).same_arena(generate(unif13, 42, 8))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda s: s.replace(b"gwtree", b"gwtrex", 1),
        lambda s: s.replace(b" v1 ", b" v9 ", 1),
        lambda s: b"\n".join(s.split(b"\n")[:3]) + b"\n",
        lambda s: s.replace(b"sum ", b"sun ", 1),
        lambda s: b"",
    ],
)
def test_corrupt_files_rejected(unif13, mutate):
    data = serialize(generate(unif13, 42, 5))
    with pytest.raises(TreeFormatError):
        deserialize(mutate(data))


def test_tampered_counts_rejected(det2):
    data = serialize(generate(det2, 1, 3)).replace(b"2 2\n", b"2 1\n", 1)
    with pytest.raises(TreeFormatError):
        deserialize(data)
