from __future__ import annotations

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import settings

from pqldp.graph import BipartiteGraph, random_bipartite

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def bipartite_graphs(draw, max_nodes: int = 16, min_upper: int = 1, min_lower: int = 1):
    """Random graphs with every node kept, so layer sizes are exactly as drawn."""
    nu = draw(st.integers(min_upper, max(min_upper, max_nodes - min_lower)))
    nl = draw(st.integers(min_lower, max(min_lower, max_nodes - nu)))
    bits = draw(st.lists(st.booleans(), min_size=nu * nl, max_size=nu * nl))
    edges = [(f"u{i}", f"l{j}") for i in range(nu) for j in range(nl) if bits[i * nl + j]]
    return BipartiteGraph.from_edges(edges, [f"u{i}" for i in range(nu)], [f"l{j}" for j in range(nl)])


def random_corpus(count: int, max_nodes: int, seed: int):
    """Seeded corpus of random graphs with varying size and density."""
    rng = np.random.default_rng(seed)
    out = []
    for t in range(count):
        n = int(rng.integers(2, max_nodes + 1))
        nu = int(rng.integers(1, n))
        out.append(random_bipartite(nu, n - nu, float(rng.uniform(0.15, 0.9)), seed * 1000 + t))
    return out


@pytest.fixture(scope="session")
def k33():
    from pqldp.graph import complete_bipartite

    return complete_bipartite(3, 3)


@pytest.fixture(scope="session")
def graph30():
    return random_bipartite(15, 15, 0.3, seed=7)
