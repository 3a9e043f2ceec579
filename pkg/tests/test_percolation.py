from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_trees
from gwperc import annealed, oracles, percolation
from gwperc.errors import InsufficientDepthError, PreconditionError
from gwperc.offspring import deterministic, parse_spec, uniform_range
from gwperc.tree import generate


def test_det2_hand_values(det2):
    t = generate(det2, 0, 2)
    assert np.allclose(percolation.survival_exact(t, 2).q, [1.0, 0.75, 0.609375], atol=1e-15)
    m = percolation.factorial_moments_exact(t, 2, 3)
    assert np.allclose(m.table[2], [1.0, 1.0, 0.5, 0.125], atol=1e-15)


def test_det2_sandwich_n1(det2):
    s = percolation.sandwich_check(generate(det2, 0, 1), 1)
    assert s.lower == pytest.approx(2 / 3, abs=1e-15)
    assert s.value == 0.75
    assert s.upper == pytest.approx(4.0, abs=1e-15)


def test_depth_guard(unif13):
    t = generate(unif13, 1, 3)
    with pytest.raises(InsufficientDepthError):
        percolation.survival_exact(t, 5)
    with pytest.raises(InsufficientDepthError):
        percolation.factorial_moments_exact(t, 5, 2)


def test_large_k_warns(unif13):
    with pytest.warns(RuntimeWarning):
        percolation.factorial_moments_exact(generate(unif13, 1, 2), 2, 7)


@pytest.mark.parametrize("tree", small_trees(uniform_range(1, 3), 12), ids=lambda t: f"seed{t.master_seed}")
def test_dp_matches_brute_force(tree):
    n = tree.generated_depth
    q = percolation.survival_exact(tree, n).q
    m = percolation.factorial_moments_exact(tree, n, 4).table
    for j in range(1, n + 1):
        assert abs(q[j] - oracles.brute_force_survival(tree, j)) < 1e-12
        assert np.max(np.abs(m[j] - oracles.brute_force_moments(tree, j, 4))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["unif:1:3", "pmf:0.3,0.3,0.4", "geom:0.6", "det:3"]), st.integers(0, 10_000))
def test_dp_matches_brute_force_property(name, seed):
    spec = parse_spec(name)
    depth = 0
    for d in range(1, 5):
        if generate(spec, seed, d).num_edges > 14:
            break
        depth = d
    if depth == 0:
        return
    tree = generate(spec, seed, depth)
    q = percolation.survival_exact(tree, depth).q[depth]
    assert abs(q - oracles.brute_force_survival(tree, depth)) < 1e-12
    first = percolation.factorial_moments_exact(tree, depth, 1).table[depth, 1]
    assert abs(first - tree.w[depth]) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_survival_monotone_and_sandwiched(seed):
    tree = generate(uniform_range(1, 3), seed, 9)
    q = percolation.survival_exact(tree, 9).q
    assert np.all(np.diff(q) <= 0) and q[0] == 1.0
    for n in range(1, 10):
        assert percolation.sandwich_bounds(tree, n).holds


def test_monte_carlo_survival_agrees(unif13):
    worst = 0.0
    reps = 100_000
    for seed in range(10):
        tree = generate(unif13, seed, 8)
        q = percolation.survival_exact(tree, 8).q
        for n in (2, 5, 8):
            freq = percolation.survival_frequency(tree, n, reps, seed)
            se = math.sqrt(q[n] * (1 - q[n]) / reps)
            worst = max(worst, abs(freq - q[n]) / se)
    assert worst < 4


def test_det2_monte_carlo_depth2(det2):
    tree = generate(det2, 0, 2)
    reps = 1_000_000
    freq = percolation.survival_frequency(tree, 2, reps, 17)
    assert abs(freq - 0.609375) < 3 * math.sqrt(0.609375 * 0.390625 / reps)


def test_percolate_once_det2_n1(det2):
    tree = generate(det2, 0, 1)
    counts = np.zeros(3, dtype=int)
    for i in range(20_000):
        out = percolation.percolate_once(tree, 1, percolation.perc_key(5, i))
        counts[out.size] += 1
        assert set(out.y_n) <= {1, 2}
    assert np.allclose(counts / counts.sum(), [0.25, 0.5, 0.25], atol=0.015)


def test_percolate_once_depth0_is_root(unif13):
    out = percolation.percolate_once(generate(unif13, 3, 2), 0, 123)
    assert out.size == 1 and out.y_n == [0]


def test_closure_on_root_only_tree_is_annealed(unif13):
    tree = generate(unif13, 4, 0)
    q = percolation.survival_exact(tree, 60, allow_closure=True).q
    assert np.max(np.abs(q - annealed.annealed_survival_exact(unif13, 60))) < 1e-14


def test_closure_matches_mean_over_trees(unif13):
    # averaging explicit q_n over independent trees estimates the annealed value
    n = 6
    vals = np.array([percolation.survival_probability(generate(unif13, s, n), n) for s in range(400)])
    target = annealed.annealed_survival_exact(unif13, n)[n]
    assert abs(vals.mean() - target) < 4 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_closure_consistent_with_deeper_explicit(unif13):
    tree = generate(unif13, 2, 14)
    shallow = generate(unif13, 2, 10)
    deep = percolation.survival_exact(tree, 40, allow_closure=True).q
    approx = percolation.survival_exact(shallow, 40, allow_closure=True).q
    assert np.array_equal(deep[:11], percolation.survival_exact(tree, 10).q)
    assert np.max(np.abs(deep - approx) / deep) < 0.2


def test_single_depth_matches_curve(unif13):
    tree = generate(unif13, 6, 10)
    curve = percolation.survival_exact(tree, 50, allow_closure=True).q
    assert percolation.survival_probability(tree, 50, allow_closure=True) == pytest.approx(curve[50], rel=1e-12)


def test_kolmogorov_top_quarter(unif13):
    tree = generate(unif13, 1, 14)
    q = percolation.survival_exact(tree, 512, allow_closure=True).q
    ns = np.arange(384, 513)
    ratios = ns * q[ns] / (3.0 * tree.w[-1])
    assert np.all((ratios > 0.85) & (ratios < 1.15))


def test_conditioned_sample_rate(unif13):
    tree = generate(unif13, 1, 12)
    s = percolation.conditioned_sizes(tree, 20, 2000, 9)
    q = percolation.survival_probability(tree, 20, allow_closure=True)
    assert s.accepted == 2000 and np.all(s.sizes > 0)
    assert abs(s.acceptance_rate - q) < 4 * s.acceptance_se


def test_conditioned_sample_threads_invariant(unif13):
    tree = generate(unif13, 1, 12)
    a = percolation.conditioned_sizes(tree, 30, 1500, 3, threads=1)
    b = percolation.conditioned_sizes(tree, 30, 1500, 3, threads=4)
    assert np.array_equal(a.sizes, b.sizes) and a.attempts == b.attempts


def test_conditioning_refuses_tiny_survival(det2):
    with pytest.raises(PreconditionError):
        percolation.conditioned_sizes(generate(det2, 0, 0), 10**7, 10, 0)


def test_conditioned_det2_n1(det2):
    s = percolation.conditioned_sizes(generate(det2, 0, 1), 1, 20_000, 2)
    frac2 = np.mean(s.sizes == 2)
    assert abs(frac2 - 1 / 3) < 4 * math.sqrt(2 / 9 / 20_000)


def test_spread_depth():
    assert percolation.spread_depth(1, 2.0) == 1
    assert percolation.spread_depth(256, 2.0) == 2
    assert percolation.spread_depth(4, 1.01) == 4
    with pytest.raises(PreconditionError):
        percolation.spread_depth(0, 2.0)


def test_spread_det2_n1(det2):
    tree = generate(det2, 0, 1)
    assert percolation.multi_branch_probability(tree, 1) == pytest.approx(1 / 3, abs=1e-15)
    r = percolation.spread_diagnostics(tree, 1, 20_000, 4)
    assert abs(r.p_multi - 1 / 3) < 4 * math.sqrt(2 / 9 / 20_000)
    assert r.hit_sum == pytest.approx(r.mean_size, abs=1e-12)


def test_spread_matches_exact_oracle(unif13):
    tree = generate(unif13, 1, 10)
    exact = percolation.multi_branch_probability(tree, 32, allow_closure=True)
    r = percolation.spread_diagnostics(tree, 32, 4000, 8)
    assert abs(r.p_multi - exact) < 4 * math.sqrt(exact * (1 - exact) / 4000)
    assert r.p_max <= 1.0 and r.p_max_raw >= 1 / 4000


def test_kolmogorov_ratio_det(det2):
    tree = generate(det2, 0, 10)
    assert percolation.kolmogorov_ratio(tree, 2000) == pytest.approx(
        2000 * annealed.annealed_survival_exact(det2, 2000)[2000] / 4.0, rel=1e-12)


def test_moment_table_helpers():
    tree = generate(deterministic(2), 0, 3)
    m = percolation.factorial_moments_exact(tree, 3, 2)
    assert m.n == 3 and m.k == 2
    assert m.second_moment(3) == pytest.approx(2 * m.entry(3, 2) + m.entry(3, 1), abs=1e-15)
