"""Bipartite graph container, edge-list loading and subsampling.

Node ids are remapped to dense 0-based indices per layer at construction
time; the counting kernels work on those indices, while the public query
functions accept the original ids.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable

import numpy as np
import scipy.sparse as sps

logger = logging.getLogger(__name__)

UPPER = "U"
LOWER = "L"


class GraphFormatError(ValueError):
    """Raised for malformed edge lists, layer maps or bipartiteness violations."""


@dataclass(frozen=True)
class BipartiteGraph:
    """Immutable two-layer graph.

    ``upper_adj[i]`` is the sorted tuple of lower indices adjacent to upper
    node ``i``; ``lower_adj`` mirrors it.
    """

    upper_ids: tuple
    lower_ids: tuple
    upper_adj: tuple[tuple[int, ...], ...]
    lower_adj: tuple[tuple[int, ...], ...]
    dropped_edges: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.upper_adj) != len(self.upper_ids) or len(self.lower_adj) != len(self.lower_ids):
            raise GraphFormatError("adjacency length does not match layer size")
        upper_index = {v: i for i, v in enumerate(self.upper_ids)}
        lower_index = {v: i for i, v in enumerate(self.lower_ids)}
        if len(upper_index) != len(self.upper_ids) or len(lower_index) != len(self.lower_ids):
            raise GraphFormatError("duplicate node id within a layer")
        both = upper_index.keys() & lower_index.keys()
        if both:
            raise GraphFormatError(f"id(s) present in both layers: {sorted(map(str, both))[:5]}")
        object.__setattr__(self, "_upper_index", upper_index)
        object.__setattr__(self, "_lower_index", lower_index)
        # derived, read-only data memoized by the protocol kernels
        object.__setattr__(self, "_cache", {})

    def cached(self, key, build):
        """Memoize ``build()`` under ``key``; safe because the graph never changes."""
        try:
            return self._cache[key]
        except KeyError:
            value = self._cache[key] = build()
            return value

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[Hashable, Hashable]],
        upper_ids: Iterable[Hashable] | None = None,
        lower_ids: Iterable[Hashable] | None = None,
        dropped_edges: int = 0,
    ) -> "BipartiteGraph":
        """Build a graph from ``(upper_id, lower_id)`` pairs.

        Explicit node lists fix the index order and allow isolated nodes;
        otherwise ids are indexed in order of first appearance. Duplicate
        edges collapse.
        """
        edges = list(edges)
        ups = list(dict.fromkeys(upper_ids)) if upper_ids is not None else []
        lows = list(dict.fromkeys(lower_ids)) if lower_ids is not None else []
        if upper_ids is None:
            ups = list(dict.fromkeys(u for u, _ in edges))
        if lower_ids is None:
            lows = list(dict.fromkeys(v for _, v in edges))
        ui = {v: i for i, v in enumerate(ups)}
        li = {v: i for i, v in enumerate(lows)}
        up_sets: list[set[int]] = [set() for _ in ups]
        low_sets: list[set[int]] = [set() for _ in lows]
        for u, v in edges:
            try:
                a, b = ui[u], li[v]
            except KeyError as exc:
                raise GraphFormatError(f"edge ({u!r}, {v!r}) references an unknown node") from exc
            up_sets[a].add(b)
            low_sets[b].add(a)
        return cls(
            tuple(ups),
            tuple(lows),
            tuple(tuple(sorted(s)) for s in up_sets),
            tuple(tuple(sorted(s)) for s in low_sets),
            dropped_edges=dropped_edges,
        )

    @property
    def n_upper(self) -> int:
        return len(self.upper_ids)

    @property
    def n_lower(self) -> int:
        return len(self.lower_ids)

    @property
    def n_nodes(self) -> int:
        return self.n_upper + self.n_lower

    @property
    def m_edges(self) -> int:
        return sum(len(a) for a in self.upper_adj)

    def layer_of(self, v: Hashable) -> str:
        if v in self._upper_index:
            return UPPER
        if v in self._lower_index:
            return LOWER
        raise KeyError(f"unknown node id {v!r}")

    def upper_index(self, v: Hashable) -> int:
        return self._upper_index[v]

    def lower_index(self, v: Hashable) -> int:
        return self._lower_index[v]

    def neighbors(self, v: Hashable) -> tuple:
        """Ids of the nodes adjacent to ``v``, in index order."""
        if self.layer_of(v) == UPPER:
            return tuple(self.lower_ids[j] for j in self.upper_adj[self._upper_index[v]])
        return tuple(self.upper_ids[j] for j in self.lower_adj[self._lower_index[v]])

    def has_edge(self, u: Hashable, v: Hashable) -> bool:
        if u in self._upper_index and v in self._lower_index:
            return self._lower_index[v] in set(self.upper_adj[self._upper_index[u]])
        if v in self._upper_index and u in self._lower_index:
            return self.has_edge(v, u)
        return False

    def edges(self):
        """Yield ``(upper_id, lower_id)`` pairs in index order."""
        for i, row in enumerate(self.upper_adj):
            for j in row:
                yield self.upper_ids[i], self.lower_ids[j]

    def edge_set(self) -> frozenset:
        return frozenset(self.edges())

    def biadjacency(self) -> sps.csr_matrix:
        """Sparse ``n_upper x n_lower`` 0/1 matrix."""
        indptr = np.zeros(self.n_upper + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.upper_adj])
        indices = np.fromiter((j for a in self.upper_adj for j in a), dtype=np.int64, count=int(indptr[-1]))
        data = np.ones(len(indices), dtype=np.int64)
        return sps.csr_matrix((data, indices, indptr), shape=(self.n_upper, self.n_lower))

    def swap_layers(self) -> "BipartiteGraph":
        """Same graph with the layer roles exchanged."""
        return BipartiteGraph(self.lower_ids, self.upper_ids, self.lower_adj, self.upper_adj)

    def __repr__(self):
        return f"BipartiteGraph(n_upper={self.n_upper}, n_lower={self.n_lower}, m={self.m_edges})"


@dataclass(frozen=True)
class EdgeNeighborList:
    """A node's row of the biadjacency matrix, stored sparsely as indices."""

    owner: Hashable
    bits: tuple[int, ...]
    domain: int

    def __post_init__(self):
        if any(b < 0 or b >= self.domain for b in self.bits):
            raise ValueError("neighbor index outside the opposite layer")


def edge_neighbor_list(g: BipartiteGraph, v: Hashable) -> EdgeNeighborList:
    if g.layer_of(v) == UPPER:
        return EdgeNeighborList(v, g.upper_adj[g.upper_index(v)], g.n_lower)
    return EdgeNeighborList(v, g.lower_adj[g.lower_index(v)], g.n_upper)


def degree(g: BipartiteGraph, v: Hashable) -> int:
    if g.layer_of(v) == UPPER:
        return len(g.upper_adj[g.upper_index(v)])
    return len(g.lower_adj[g.lower_index(v)])


# -- loading -----------------------------------------------------------------


def _read_pairs(path: Path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            # '%' is the KONECT comment marker
            if not line or line[0] in "#%":
                continue
            tokens = line.split()
            if len(tokens) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            pairs.append((tokens[0], tokens[1]))
    return pairs


def read_layer_map(path: str | Path) -> dict[str, str]:
    """Parse an ``id<TAB>U|L`` file."""
    layers: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2 or tokens[1] not in (UPPER, LOWER):
                raise GraphFormatError(f"{path}:{lineno}: expected 'id<TAB>U|L', got {line!r}")
            node, layer = tokens
            if layers.get(node, layer) != layer:
                raise GraphFormatError(f"{path}:{lineno}: id {node!r} assigned to both layers")
            layers[node] = layer
    return layers


def random_bipartition(nodes: Iterable[Hashable], seed: int) -> dict[Hashable, str]:
    """Balanced random layer assignment for graphs that are not bipartite.

    Nodes are sorted (by string form) before shuffling so the result depends
    only on the node set and the seed.
    """
    ordered = sorted(set(nodes), key=str)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    half = (len(ordered) + 1) // 2
    return {ordered[p]: (UPPER if rank < half else LOWER) for rank, p in enumerate(perm)}


def load_edge_list(
    path: str | Path,
    layers: str | dict[str, str] = "first-column",
    strict: bool = True,
) -> BipartiteGraph:
    """Load a whitespace-separated edge list as a bipartite graph.

    ``layers`` is one of:

    * ``"first-column"``: the first token of each line is an upper node. An id
      belongs to the layer of its first appearance.
    * ``"random"`` or ``"random:SEED"``: balanced random bipartition
      (see :func:`random_bipartition`); within-layer edges are violations.
    * a path to a layer-map file, or an already-parsed ``{id: "U"|"L"}`` dict.

    Edges that violate bipartiteness (or name unmapped ids) raise
    :class:`GraphFormatError` when ``strict``; otherwise they are dropped and
    counted in ``graph.dropped_edges``.
    """
    path = Path(path)
    try:
        pairs = _read_pairs(path)
    except OSError as exc:
        raise OSError(f"cannot read edge list {path}: {exc}") from exc

    explicit = False
    if isinstance(layers, dict):
        layer_map, explicit = layers, True
    elif layers == "first-column":
        layer_map = {}
        for a, b in pairs:
            layer_map.setdefault(a, UPPER)
            layer_map.setdefault(b, LOWER)
    elif layers == "random" or layers.startswith("random:"):
        seed = int(layers.partition(":")[2] or 0)
        layer_map = random_bipartition((x for pair in pairs for x in pair), seed)
    else:
        layer_map, explicit = read_layer_map(layers), True

    edges = []
    dropped = 0
    for a, b in pairs:
        la, lb = layer_map.get(a), layer_map.get(b)
        if la == UPPER and lb == LOWER:
            edges.append((a, b))
        elif la == LOWER and lb == UPPER:
            edges.append((b, a))
        elif strict:
            why = "unmapped id" if la is None or lb is None else f"both ends in layer {la}"
            raise GraphFormatError(f"edge ({a}, {b}) violates bipartiteness: {why}")
        else:
            dropped += 1
    if dropped:
        logger.warning("dropped %d non-bipartite edge(s) from %s", dropped, path)
    if not edges:
        raise GraphFormatError(f"{path}: zero edges after filtering")

    # explicit maps may name isolated nodes; keep them, in map order
    if explicit:
        ups = [v for v, lay in layer_map.items() if lay == UPPER]
        lows = [v for v, lay in layer_map.items() if lay == LOWER]
        return BipartiteGraph.from_edges(edges, ups, lows, dropped_edges=dropped)
    return BipartiteGraph.from_edges(edges, dropped_edges=dropped)


def write_edge_list(g: BipartiteGraph, path: str | Path, layer_path: str | Path | None = None) -> None:
    """Write ``upper lower`` lines; optionally a layer map that keeps isolated nodes."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")
    if layer_path is not None:
        with open(layer_path, "w", encoding="utf-8") as fh:
            for u in g.upper_ids:
                fh.write(f"{u}\t{UPPER}\n")
            for v in g.lower_ids:
                fh.write(f"{v}\t{LOWER}\n")


# -- sampling and generators -------------------------------------------------


def induced_random_subgraph(g: BipartiteGraph, n: int, seed: int) -> BipartiteGraph:
    """Induced subgraph on ``n`` nodes drawn without replacement.

    The draw is stratified so each layer contributes in proportion to its
    size; chosen nodes keep their relative index order.
    """
    total = g.n_nodes
    if not 0 < n <= total:
        raise ValueError(f"sample size {n} outside (0, {total}]")
    n_up = int(round(n * g.n_upper / total))
    n_up = min(max(n_up, n - g.n_lower), g.n_upper)
    n_low = n - n_up
    rng = np.random.default_rng(seed)
    ups = np.sort(rng.choice(g.n_upper, size=n_up, replace=False))
    lows = np.sort(rng.choice(g.n_lower, size=n_low, replace=False))
    keep_low = {int(j): t for t, j in enumerate(lows)}
    upper_adj = []
    for i in ups:
        upper_adj.append(tuple(keep_low[j] for j in g.upper_adj[i] if j in keep_low))
    lower_adj: list[list[int]] = [[] for _ in lows]
    for t, row in enumerate(upper_adj):
        for j in row:
            lower_adj[j].append(t)
    return BipartiteGraph(
        tuple(g.upper_ids[i] for i in ups),
        tuple(g.lower_ids[j] for j in lows),
        tuple(upper_adj),
        tuple(tuple(r) for r in lower_adj),
    )


def random_bipartite(n_upper: int, n_lower: int, edge_prob: float, seed: int) -> BipartiteGraph:
    """Erdos-Renyi style bipartite graph with ids ``u0.. / l0..``."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n_upper, n_lower)) < edge_prob
    edges = [(f"u{i}", f"l{j}") for i, j in zip(*np.nonzero(mask))]
    return BipartiteGraph.from_edges(
        edges, [f"u{i}" for i in range(n_upper)], [f"l{j}" for j in range(n_lower)]
    )


def complete_bipartite(a: int, b: int) -> BipartiteGraph:
    ups = [f"u{i}" for i in range(a)]
    lows = [f"l{j}" for j in range(b)]
    return BipartiteGraph.from_edges([(u, v) for u in ups for v in lows], ups, lows)
