"""The compiled kernels and the pure-Python fallback must agree bit for bit."""

from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from gwperc import _pykernels as py
from gwperc import rng
from gwperc.iic import spine_weight_table
from gwperc.offspring import parse_spec
from gwperc.tree import generate

compiled = pytest.importorskip("gwperc._kernels")

SPECS = ["unif:1:3", "det:2", "geom:0.5"]


def _setup(name):
    spec = parse_spec(name)
    return spec, rng.child_salts(len(spec.cdf)), np.uint64(rng.derive_key(3, "tree", 0))


@pytest.mark.parametrize("name", SPECS)
def test_cluster_sizes(name):
    spec, salts, root = _setup(name)
    roots = np.full(300, root, dtype=np.uint64)
    pkeys = rng.derive_keys(1, "perc", 0, 300)
    pc = 1.0 / spec.mean
    a = compiled.cluster_sizes(roots, pkeys, spec.cdf, salts, pc, 12, 10**9)
    b = py.cluster_sizes(roots, pkeys, spec.cdf, salts, pc, 12, 10**9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("name", SPECS)
def test_cluster_detail(name):
    spec, salts, root = _setup(name)
    for i in range(40):
        pk = np.uint64(rng.derive_key(2, "perc", i))
        a = compiled.cluster_detail(root, pk, spec.cdf, salts, 1 / spec.mean, 9, 2)
        b = py.cluster_detail(root, pk, spec.cdf, salts, 1 / spec.mean, 9, 2)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]


@pytest.mark.parametrize("name", SPECS)
def test_descendant_count(name):
    spec, salts, root = _setup(name)
    for depth in (0, 1, 5, 9):
        assert compiled.descendant_count(root, spec.cdf, salts, depth) == py.descendant_count(root, spec.cdf, salts, depth)


@pytest.mark.parametrize("mode", [py.MODE_UNIFORM, py.MODE_RELATIVE, py.MODE_TABLE])
def test_iic_run(mode):
    spec, salts, root = _setup("unif:1:3")
    n = 6
    if mode == py.MODE_TABLE:
        tree = generate(spec, 3, n + 4)
        wk, wv = spine_weight_table(tree, n, n + 4)
    else:
        wk, wv = np.zeros(0, dtype=np.uint64), np.zeros(0)
    roots = np.full(50, root, dtype=np.uint64)
    ikeys = rng.derive_keys(4, "iic", 0, 50)
    for record in (False, True):
        a = compiled.iic_run(roots, ikeys, spec.cdf, salts, 0.5, n, 4, mode, wk, wv, record, 10**9)
        b = py.iic_run(roots, ikeys, spec.cdf, salts, 0.5, n, 4, mode, wk, wv, record, 10**9)
        for x, y in zip(a, b):
            assert np.array_equal(np.asarray(x), np.asarray(y))


def test_pure_backend_selected_by_environment():
    out = subprocess.run(
        [sys.executable, "-c", "import gwperc; print(gwperc.BACKEND)"],
        env={"GWPERC_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
