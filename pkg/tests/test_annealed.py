from __future__ import annotations

import math

import numpy as np
import pytest

from gwperc import annealed, percolation
from gwperc.errors import PreconditionError
from gwperc.offspring import parse_spec
from gwperc.tree import generate


def test_det2_first_steps(det2):
    q = annealed.annealed_survival_exact(det2, 2)
    assert np.allclose(q, [1.0, 0.75, 0.609375], atol=1e-15)


@pytest.mark.parametrize("name", ["det:2", "unif:1:3", "geom:0.4", "poisplus:1.5"])
def test_strictly_decreasing(name):
    q = annealed.annealed_survival_exact(parse_spec(name), 2000)
    assert np.all(np.diff(q) < 0) and q[-1] > 0


def test_quenched_equals_annealed_for_det3():
    spec = parse_spec("det:3")
    q = percolation.survival_exact(generate(spec, 1, 6), 300, allow_closure=True).q
    assert np.max(np.abs(q - annealed.annealed_survival_exact(spec, 300))) < 1e-12


def test_kolmogorov_limit(unif13):
    n = 10_000
    assert n * annealed.annealed_survival_exact(unif13, n)[n] / 3.0 == pytest.approx(1.0, abs=0.02)


def test_yaglom_mean_identity(det2):
    # E[Z_n | Z_n > 0] = 1 / q_n for a critical process
    n = 50
    y = annealed.annealed_yaglom(det2, n, 4000, seed=3)
    q = annealed.annealed_survival_exact(det2, n)[n]
    assert abs(y.acceptance_rate - q) < 4 * y.acceptance_se
    se = math.sqrt(y.summary.variance) / math.sqrt(y.accepted)
    assert abs(y.summary.mean - 1 / (n * q)) < 4 * se


def test_yaglom_unif_close_to_exponential(unif13):
    y = annealed.annealed_yaglom(unif13, 200, 4000, seed=1)
    assert y.ks < 0.05 and y.accepted == 4000


def test_yaglom_threads_invariant(unif13):
    a = annealed.annealed_yaglom(unif13, 30, 1000, seed=6, threads=1)
    b = annealed.annealed_yaglom(unif13, 30, 1000, seed=6, threads=4)
    assert np.array_equal(a.sizes, b.sizes) and a.attempts == b.attempts


def test_yaglom_preconditions(unif13):
    with pytest.raises(PreconditionError):
        annealed.annealed_yaglom(unif13, 30, 10, seed=6)
    with pytest.raises(PreconditionError):
        annealed.annealed_survival_exact(unif13, 0)


def test_annealed_iic(det2, unif13):
    n = 32
    e = annealed.annealed_iic_sizes(det2, n, 3000, seed=4)
    assert abs(e.summary.mean - (0.5 + 1 / n)) < 4 * math.sqrt(e.summary.variance) / math.sqrt(3000)
    u = annealed.annealed_iic_sizes(unif13, n, 1000, seed=4, lookahead=6)
    assert np.all(u.c_n >= 1)
