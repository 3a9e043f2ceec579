from __future__ import annotations

import pytest

from gwperc import generate, parse_spec


@pytest.fixture(scope="session")
def det2():
    return parse_spec("det:2")


@pytest.fixture(scope="session")
def unif13():
    return parse_spec("unif:1:3")


def small_trees(spec, count, max_edges=20, max_depth=4):
    """First ``count`` seeds' trees, each as deep as ``max_edges`` allows."""
    out, seed = [], 0
    while len(out) < count:
        depth = 0
        for d in range(1, max_depth + 1):
            if generate(spec, seed, d).num_edges > max_edges:
                break
            depth = d
        if depth:
            out.append(generate(spec, seed, depth))
        seed += 1
    return out
