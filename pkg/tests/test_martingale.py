from __future__ import annotations

import numpy as np
import pytest

from gwperc import martingale, percolation
from gwperc.errors import PreconditionError
from gwperc.offspring import derive_params, uniform_range
from gwperc.tree import generate


def test_first_order_trace_is_w(unif13):
    tree = generate(unif13, 12, 8)
    tr = martingale.trace(tree, 8, 1)
    assert np.allclose(tr.values, tree.w, atol=1e-13)


def test_det2_second_order_is_zero(det2):
    tr = martingale.trace(generate(det2, 0, 10), 10, 2)
    assert np.max(np.abs(tr.values)) < 1e-13


def test_m_statistic_hand_value(unif13):
    tree = generate(unif13, 3, 5)
    moments = percolation.factorial_moments_exact(tree, 5, 2)
    p = derive_params(unif13, 2)
    expected = moments.entry(5, 2) - p.c_coeff(2, 1) * sum(moments.entry(j, 1) for j in range(5))
    assert martingale.m_statistic(tree, 5, 2, moments) == pytest.approx(expected, rel=1e-13)


def test_trace_matches_statistic(unif13):
    tree = generate(unif13, 3, 7)
    moments = percolation.factorial_moments_exact(tree, 7, 3)
    tr = martingale.trace(tree, 7, 3)
    for n in range(8):
        assert tr.values[n] == pytest.approx(martingale.m_statistic(tree, n, 3, moments), rel=1e-12, abs=1e-14)


def test_study_rows_are_the_single_tree_traces(unif13):
    study = martingale.increment_study(unif13, 2, 6, 100, seed=7)
    for r in (0, 57, 99):
        tree = generate(unif13, martingale.replicate_tree_seed(7, r), 6)
        assert np.allclose(study.traces[r], martingale.trace(tree, 6, 2).values, atol=1e-12)


def test_det2_increments_vanish(det2):
    study = martingale.increment_study(det2, 2, 8, 100, seed=1)
    assert np.all(study.mean_increment == 0) and study.fit is None


@pytest.mark.parametrize("k", [2, 3])
def test_increments_have_zero_mean(k):
    study = martingale.increment_study(uniform_range(1, 3), k, 10, 2000, seed=99)
    assert study.max_abs_z < 4
    assert study.fit is not None and study.fit.slope < 0


def test_threads_do_not_change_results(unif13):
    a = martingale.increment_study(unif13, 2, 6, 300, seed=4, threads=1, batch=64)
    b = martingale.increment_study(unif13, 2, 6, 300, seed=4, threads=3, batch=64)
    assert np.array_equal(a.traces, b.traces)


def test_too_few_replicates(unif13):
    with pytest.raises(PreconditionError):
        martingale.increment_study(unif13, 2, 6, 50, seed=4)
