"""k-stars neighboring lists, their perturbation, and edge-budget conversion.

A k-star centered on a user is identified with a k-subset of the opposite
layer. Subsets are mapped to integers with the combinatorial number system
(colex order), so randomized response can treat the C(n, k)-sized star
domain as a flat index range.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb
from typing import Hashable, Iterable, Sequence

import numpy as np

from .graph import UPPER, BipartiteGraph
from .mechanism import PrivacyParams, rr_existing_only, sparse_rr


def rank_subset(subset: Sequence[int]) -> int:
    """Colex rank of a strictly increasing sequence: sum of C(c_j, j)."""
    r = 0
    prev = -1
    for j, c in enumerate(subset, 1):
        if c <= prev:
            raise ValueError("subset must be strictly increasing")
        prev = c
        r += comb(c, j)
    return r


def unrank_subset(x: int, k: int) -> tuple[int, ...]:
    """Inverse of :func:`rank_subset`."""
    if x < 0 or k < 0:
        raise ValueError("rank and k must be non-negative")
    out = []
    for j in range(k, 0, -1):
        # largest c with C(c, j) <= x
        lo, hi = j - 1, j
        while comb(hi, j) <= x:
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if comb(mid, j) <= x:
                lo = mid
            else:
                hi = mid
        out.append(lo)
        x -= comb(lo, j)
    return tuple(reversed(out))


def rank_subsets(subsets: np.ndarray, n: int) -> np.ndarray:
    """Vectorized colex ranks for an ``(m, k)`` array of sorted rows over ``range(n)``."""
    subsets = np.asarray(subsets, dtype=np.int64)
    m, k = subsets.shape if subsets.ndim == 2 else (0, 0)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    if comb(n, k) > np.iinfo(np.int64).max:
        return np.array([rank_subset(row) for row in subsets.tolist()], dtype=object)
    table = _comb_table(n, k)
    return sum(table[subsets[:, j - 1], j] for j in range(1, k + 1))


@lru_cache(maxsize=32)
def _comb_table(n: int, k: int) -> np.ndarray:
    table = np.array([[comb(c, j) for j in range(k + 1)] for c in range(n)], dtype=np.int64)
    table.flags.writeable = False
    return table


@dataclass(frozen=True)
class KStarsList:
    """Sparse k-stars neighboring list of one user.

    ``stars`` are sorted tuples of opposite-layer indices; the implicit list
    has ``domain_size = C(n_opposite, k)`` positions.
    """

    owner: Hashable
    k: int
    stars: tuple[tuple[int, ...], ...]
    n_opposite: int

    @property
    def domain_size(self) -> int:
        return comb(self.n_opposite, self.k)

    @property
    def t(self) -> int:
        return len(self.stars)

    def ranks(self) -> np.ndarray:
        """Sorted colex ranks of the stars (memoized, read-only)."""
        return self._ranks

    @cached_property
    def _ranks(self) -> np.ndarray:
        if not self.stars:
            out = np.zeros(0, dtype=np.int64)
        else:
            out = np.sort(rank_subsets(np.array(self.stars), self.n_opposite))
        out.flags.writeable = False
        return out


class NoisyStarSet:
    """Randomized-response output of one user's k-stars list, held as colex ranks."""

    __slots__ = ("owner", "k", "ranks", "rho_applied", "n_opposite")

    def __init__(self, owner, k: int, ranks, rho_applied: float = 1.0, n_opposite: int = 0):
        self.owner = owner
        self.k = k
        self.ranks = np.asarray(ranks, dtype=np.int64)
        self.rho_applied = rho_applied
        self.n_opposite = n_opposite

    @property
    def noisy_stars(self) -> frozenset:
        return frozenset(unrank_subset(int(r), self.k) for r in self.ranks)

    def __len__(self):
        return len(self.ranks)

    def __eq__(self, other):
        if not isinstance(other, NoisyStarSet):
            return NotImplemented
        return (
            self.owner == other.owner
            and self.k == other.k
            and self.rho_applied == other.rho_applied
            and np.array_equal(self.ranks, other.ranks)
        )

    def __repr__(self):
        return f"NoisyStarSet(owner={self.owner!r}, k={self.k}, size={len(self)}, rho={self.rho_applied})"


def ks_neighboring_list(g: BipartiteGraph, v: Hashable, k: int) -> KStarsList:
    """All k-subsets of ``v``'s own neighborhood; uses nothing beyond its row."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if g.layer_of(v) == UPPER:
        row, n_opp = g.upper_adj[g.upper_index(v)], g.n_lower
    else:
        row, n_opp = g.lower_adj[g.lower_index(v)], g.n_upper
    return KStarsList(v, k, tuple(combinations(row, k)), n_opp)


def perturb_stars(ks: KStarsList, params: PrivacyParams, rng: np.random.Generator) -> NoisyStarSet:
    """RR over the full star domain, then independent rho-thinning."""
    mu = params.mu
    true_ranks = ks.ranks()
    if params.literal_rr:
        noisy = rr_existing_only(true_ranks, mu, rng)
    else:
        noisy = sparse_rr(true_ranks, ks.domain_size, mu, rng)
    if params.rho < 1.0:
        noisy = noisy[rng.random(len(noisy)) < params.rho]
    return NoisyStarSet(ks.owner, ks.k, noisy, params.rho, ks.n_opposite)


def write_noisy_stars(sets: Iterable[NoisyStarSet], path, member_ids: Sequence | None = None) -> None:
    """One line per star: ``owner_id k member_ids...``."""
    with open(path, "w", encoding="utf-8") as fh:
        for ns in sets:
            for r in ns.ranks:
                members = unrank_subset(int(r), ns.k)
                if member_ids is not None:
                    members = [member_ids[m] for m in members]
                fh.write(" ".join(map(str, (ns.owner, ns.k, *members))) + "\n")


def read_noisy_stars(path, member_index: dict | None = None) -> dict[str, list[tuple[int, ...]]]:
    """Parse :func:`write_noisy_stars` output into ``{owner: [sorted member tuple, ...]}``."""
    out: dict[str, list[tuple[int, ...]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if not tokens:
                continue
            owner, k, members = tokens[0], int(tokens[1]), tokens[2:]
            if len(members) != k:
                raise ValueError(f"star line has {len(members)} members, expected {k}")
            idx = [member_index[m] for m in members] if member_index is not None else [int(m) for m in members]
            out.setdefault(owner, []).append(tuple(sorted(idx)))
    return out


# -- budget conversion -------------------------------------------------------


def edge_budget_factor(k: int) -> Fraction:
    """k 2^(k-1) / (2^k - 1), the multiplier from k-star budget to edge budget."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return Fraction(k * 2 ** (k - 1), 2**k - 1)


def edge_budget_equivalent(k: int, epsilon):
    """Edge budget covered by an epsilon k-stars release.

    Integer or ``Fraction`` budgets give an exact ``Fraction``; floats a float.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if isinstance(epsilon, (int, Fraction)):
        return edge_budget_factor(k) * epsilon
    return float(edge_budget_factor(k)) * epsilon


def avg_flip_factor_oracle(k: int) -> Fraction:
    """Mean number of edge flips behind one 0 -> 1 star flip, by enumeration.

    Every configuration of the k spoke edges other than the complete star is
    a possible "absent" state; turning it into the star flips exactly the
    missing spokes.
    """
    if not 1 <= k <= 20:
        raise ValueError(f"k must lie in [1, 20], got {k}")
    full = (1 << k) - 1
    flips = sum(k - bin(mask).count("1") for mask in range(full))
    return Fraction(flips, full)
