"""Exact, non-private (p,q)-clique counting.

``p`` always indexes the upper layer and ``q`` the lower layer. Counts are
Python integers, so binomials on dense graphs never overflow.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import reduce
from itertools import combinations
from math import comb

from .graph import BipartiteGraph


@dataclass(frozen=True)
class CliqueCounts:
    f_pq: int
    n_1q: int
    n_2q: int
    s_coeff: int

    def __post_init__(self):
        if min(self.f_pq, self.n_1q, self.n_2q) < 0:
            raise ValueError("clique counts must be non-negative")
        if self.s_coeff != 2 * self.n_2q + self.n_1q:
            raise ValueError("s_coeff must equal 2*n_2q + n_1q")


def _check_pq(p: int, q: int) -> None:
    if p < 1 or q < 1:
        raise ValueError(f"p and q must be >= 1 (got p={p}, q={q})")


def star_owner_counts(g: BipartiteGraph, q: int) -> Counter:
    """Map each q-subset of lower indices to the number of upper nodes containing it.

    Only subsets of actual neighborhoods are enumerated.
    """
    counts: Counter = Counter()
    for row in g.upper_adj:
        if len(row) >= q:
            counts.update(combinations(row, q))
    return counts


def count_pq_cliques(g: BipartiteGraph, p: int, q: int) -> int:
    """Number of (p,q)-cliques: for every reachable q-subset Y, add C(|common upper neighbors of Y|, p)."""
    _check_pq(p, q)
    lower_sets = [frozenset(a) for a in g.lower_adj]
    seen = set()
    total = 0
    for row in g.upper_adj:
        for ys in combinations(row, q):
            if ys in seen:
                continue
            seen.add(ys)
            common = reduce(frozenset.intersection, (lower_sets[y] for y in ys))
            total += comb(len(common), p)
    return total


def count_pq_cliques_naive(g: BipartiteGraph, p: int, q: int) -> int:
    """All-subsets enumerator; meant for graphs with at most ~16 nodes."""
    _check_pq(p, q)
    up = [frozenset(a) for a in g.upper_adj]
    total = 0
    for xs in combinations(range(g.n_upper), p):
        for ys in combinations(range(g.n_lower), q):
            if all(y in up[x] for x in xs for y in ys):
                total += 1
    return total


def count_butterfly_like(g: BipartiteGraph, q: int) -> int:
    """(2,q)-cliques via pairwise common-neighbor counts; sparse-matrix fast path."""
    a = g.biadjacency()
    common = (a @ a.T).tocoo()
    keep = common.row < common.col
    return sum(comb(int(c), q) for c in common.data[keep])


def count_1q_2q(g: BipartiteGraph, q: int) -> CliqueCounts:
    """N_{1,q}, N_{2,q} and S = 2 N_{2,q} + N_{1,q}; ``f_pq`` holds N_{2,q}."""
    _check_pq(1, q)
    n_1q = sum(comb(len(a), q) for a in g.upper_adj)
    n_2q = count_pq_cliques(g, 2, q)
    return CliqueCounts(f_pq=n_2q, n_1q=n_1q, n_2q=n_2q, s_coeff=2 * n_2q + n_1q)


def clique_counts(g: BipartiteGraph, p: int, q: int) -> CliqueCounts:
    base = count_1q_2q(g, q)
    f = base.n_2q if p == 2 else count_pq_cliques(g, p, q)
    return CliqueCounts(f_pq=f, n_1q=base.n_1q, n_2q=base.n_2q, s_coeff=base.s_coeff)


def square_identity_sides(g: BipartiteGraph, q: int) -> tuple[int, int]:
    """Both sides of the star-square identity.

    Left: sum over q-subsets Y of c_Y**2, where c_Y is the number of upper
    nodes whose neighborhood contains Y (tallied per upper node, not by
    intersection). Right: 2 * N_{2,q} + N_{1,q}.
    """
    _check_pq(1, q)
    left = sum(c * c for c in star_owner_counts(g, q).values())
    counts = count_1q_2q(g, q)
    return left, counts.s_coeff


def verify_lemma1(g: BipartiteGraph, q: int) -> bool:
    """True iff the star-square identity holds on ``g`` for this ``q``."""
    left, right = square_identity_sides(g, q)
    return left == right
