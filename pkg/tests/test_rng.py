from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from gwperc import rng


@given(st.integers(0, rng.MASK64))
def test_vector_mix_matches_scalar(x):
    assert int(rng.mix64_array(np.array([x], dtype=np.uint64))[0]) == rng.mix64(x)


def test_derive_keys_match_scalar():
    keys = rng.derive_keys(99, "perc", 10, 5)
    assert [int(k) for k in keys] == [rng.derive_key(99, "perc", 10 + i) for i in range(5)]


def test_streams_are_separated_by_tag():
    assert rng.derive_key(1, "perc", 0) != rng.derive_key(1, "iic", 0)


def test_unit_range():
    u = rng.unit_array(rng.derive_keys(3, "x", 0, 100_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def test_offspring_counts_vector_matches_scalar():
    cdf = np.cumsum([0.0, 0.2, 0.5, 0.3])
    cdf[-1] = 1.0
    keys = rng.derive_keys(4, "tree", 0, 1000)
    vec = rng.offspring_counts(keys, cdf)
    assert [rng.offspring_count(int(k), cdf) for k in keys] == vec.tolist()
