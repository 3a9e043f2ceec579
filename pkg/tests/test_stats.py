from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from gwperc.errors import PreconditionError
from gwperc.stats import EmpiricalSummary, decay_fit, exp_cdf, gamma2_cdf, ks_distance


def uniform_cdf(x):
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def test_ks_single_point():
    assert ks_distance([0.5], uniform_cdf) == 0.5


def test_ks_matches_scipy():
    x = np.random.default_rng(1).exponential(0.5, size=500)
    assert ks_distance(x, exp_cdf(2.0)) == pytest.approx(sps.kstest(x, "expon", args=(0, 0.5)).statistic, abs=1e-12)


def test_cdfs_match_scipy():
    xs = np.linspace(0, 5, 41)
    assert np.allclose(exp_cdf(3.0)(xs), sps.expon.cdf(xs, scale=1 / 3), atol=1e-14)
    assert np.allclose(gamma2_cdf(3.0)(xs), sps.gamma.cdf(xs, 2, scale=1 / 3), atol=1e-14)


def test_exponential_vs_gamma_separated():
    x = np.random.default_rng(0).gamma(2.0, 1 / 3.0, size=200_000)
    assert ks_distance(x, exp_cdf(3.0)) > 0.1
    assert ks_distance(x, gamma2_cdf(3.0)) < 0.01


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=200))
def test_ks_range(xs):
    d = ks_distance(xs, uniform_cdf)
    assert 0.0 <= d <= 1.0
    assert d >= 1 / (2 * len(xs)) - 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.001, 10, allow_nan=False), min_size=1, max_size=100))
def test_ks_invariant_under_monotone_map(xs):
    F = exp_cdf(1.3)
    assert ks_distance(xs, F) == pytest.approx(ks_distance(F(np.array(xs)), uniform_cdf), abs=1e-12)


def test_rate_must_be_positive():
    for fn in (exp_cdf, gamma2_cdf):
        with pytest.raises(PreconditionError):
            fn(0.0)


def test_summary():
    s = EmpiricalSummary.of([1.0, 2.0, 3.0])
    assert s.mean == 2.0 and s.variance == pytest.approx(1.0)
    assert s.std_error == pytest.approx(1 / math.sqrt(3))
    s.audit()
    assert s.as_dict()["mean"] == 2.0


def test_decay_fit_recovers_line():
    ns = np.arange(3, 12)
    fit = decay_fit(ns, 2.5 * np.exp(-0.3 * ns))
    assert fit.slope == pytest.approx(-0.3, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(2.5), abs=1e-12)
    assert fit.residual < 1e-12


def test_decay_fit_rejects_nonpositive():
    with pytest.raises(PreconditionError):
        decay_fit([1, 2], [1.0, 0.0])


def test_wrong_law_rejected_at_spec_sample_size():
    x = np.random.default_rng(9).gamma(2.0, 1 / 4.0, size=5000)
    assert ks_distance(x, exp_cdf(4.0)) > 0.1


def test_exp_gamma_sup_distance_by_scan():
    # same rate: the gap G - F = lam x exp(-lam x) peaks at 1/e
    xs = np.linspace(0, 5, 500_001)
    gap = np.max(np.abs(exp_cdf(4.0)(xs) - gamma2_cdf(4.0)(xs)))
    assert gap == pytest.approx(math.exp(-1), abs=1e-9)
