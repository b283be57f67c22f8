"""Two-round user/collector protocols for private (p,q)-clique counting.

Round one: every upper-layer user perturbs its own list (edge neighbors for
the edge-LDP baseline, q-stars for the k-stars algorithm) and uploads it.
Round two: the collector broadcasts the pooled noisy data; each user counts
noisy cliques that contain one of its true q-stars together with p-1 users
of larger index, corrects the count locally and uploads a real number. The
collector sums the uploads.

Per-user quantities in an :class:`EstimateReport`:

``f``
    noisy (p,q)-clique count (weighted by (1/rho)^(p-1) under rescaled
    k-stars sampling).
``s``
    corrective count: near-cliques with exactly one absent noisy edge
    (edge LDP), or the per-configuration (p-2)-subset products (k-stars).
``raw``
    correction numerator. ``f - mu*s`` in ``first_order`` mode; the full
    expansion of the product of ``(b - mu)`` terms in ``exact`` mode.
``local``
    ``raw / (1-2mu)^m``, or its positive part when ``abs_correction`` is on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from itertools import combinations
from pathlib import Path
from typing import Hashable

import numpy as np
import scipy.sparse as sps
from scipy.special import comb as fcomb

from .graph import BipartiteGraph, EdgeNeighborList
from .mechanism import PrivacyParams, derive_seed, rr_existing_only, sparse_rr, user_rng
from .oracle import count_pq_cliques
from .stars import KStarsList, NoisyStarSet, perturb_stars

EDGE = "edge"
KSTARS = "kstars"
ALGORITHMS = (EDGE, KSTARS)

ROUND_ONE = 1


@dataclass(frozen=True)
class NoisyEdgeSet:
    """RR output of one user's edge neighbor list, as sorted opposite-layer indices."""

    owner: Hashable
    neighbors: np.ndarray = field(compare=False)
    domain: int

    def __len__(self):
        return len(self.neighbors)


@dataclass(frozen=True)
class RoundOneTranscript:
    algorithm: str
    seed: int
    params: PrivacyParams
    payloads: tuple


@dataclass(frozen=True)
class EstimateReport:
    algorithm: str
    p: int
    q: int
    params: PrivacyParams
    seed: int
    owners: tuple
    f: tuple[float, ...]
    s: tuple[float, ...]
    raw: tuple[float, ...]
    local: tuple[float, ...]
    payload_sizes: tuple[int, ...]
    true_count: int | None = None
    transcript: RoundOneTranscript | None = field(default=None, compare=False, repr=False)

    @property
    def aggregate(self) -> float:
        return math.fsum(self.local)

    @property
    def correction_exponent(self) -> int:
        return _exponent(self.algorithm, self.p, self.q)

    @property
    def bias(self) -> float | None:
        return None if self.true_count is None else self.aggregate - self.true_count


def _exponent(algorithm: str, p: int, q: int) -> int:
    return (p - 1) * q if algorithm == EDGE else p - 1


def finalize_local(raw: np.ndarray, mu: float, exponent: int, abs_correction: bool) -> np.ndarray:
    """Divide the correction numerators by ``(1-2mu)^exponent``.

    With ``abs_correction`` the numerator is replaced by
    ``(x + |x|) / 2``: unchanged when non-negative, zero otherwise.
    """
    raw = np.asarray(raw, dtype=float)
    num = (raw + np.abs(raw)) / 2.0 if abs_correction else raw
    return num / (1.0 - 2.0 * mu) ** exponent


# -- round one (user side) ---------------------------------------------------


def edge_user_round_one(row: EdgeNeighborList, params: PrivacyParams, rng: np.random.Generator) -> NoisyEdgeSet:
    """A user's upload under edge LDP; sees only its own row."""
    if params.literal_rr:
        noisy = rr_existing_only(row.bits, params.mu, rng)
    else:
        noisy = sparse_rr(row.bits, row.domain, params.mu, rng)
    return NoisyEdgeSet(row.owner, noisy, row.domain)


def kstars_user_round_one(ks: KStarsList, params: PrivacyParams, rng: np.random.Generator) -> NoisyStarSet:
    """A user's upload under k-stars LDP; sees only its own k-stars list."""
    return perturb_stars(ks, params, rng)


def _upper_rows(g: BipartiteGraph) -> list[EdgeNeighborList]:
    return g.cached(
        "rows", lambda: [EdgeNeighborList(u, g.upper_adj[i], g.n_lower) for i, u in enumerate(g.upper_ids)]
    )


def _star_lists(g: BipartiteGraph, k: int) -> list[KStarsList]:
    def build():
        lists = [KStarsList(u, k, tuple(combinations(g.upper_adj[i], k)), g.n_lower) for i, u in enumerate(g.upper_ids)]
        for ks in lists:
            ks.ranks()  # warm the memo once
        return lists

    return g.cached(("stars", k), build)


def round_one_edge(g: BipartiteGraph, params: PrivacyParams, seed: int) -> RoundOneTranscript:
    payloads = tuple(
        edge_user_round_one(row, params, user_rng(seed, ROUND_ONE, i)) for i, row in enumerate(_upper_rows(g))
    )
    return RoundOneTranscript(EDGE, seed, params, payloads)


def round_one_kstars(g: BipartiteGraph, params: PrivacyParams, seed: int) -> RoundOneTranscript:
    payloads = tuple(
        kstars_user_round_one(ks, params, user_rng(seed, ROUND_ONE, i)) for i, ks in enumerate(_star_lists(g, params.k))
    )
    return RoundOneTranscript(KSTARS, seed, params, payloads)


# -- round two (local counting) ----------------------------------------------


def _signed_product_sum(present: np.ndarray, total: np.ndarray, order: int, hi: float, lo: float) -> np.ndarray:
    """Sum over all ``order``-subsets of ``total`` factors of their product.

    ``present`` of the factors equal ``hi`` and the rest equal ``lo``; the
    result is the elementary symmetric polynomial evaluated in closed form.
    """
    present = np.asarray(present, dtype=float)
    total = np.asarray(total, dtype=float)
    out = np.zeros(np.broadcast(present, total).shape)
    for j in range(order + 1):
        out += fcomb(present, j) * fcomb(total - present, order - j) * hi**j * lo ** (order - j)
    return out


def _noisy_matrix(payloads, n_rows: int, n_cols: int) -> sps.csr_matrix:
    lengths = np.fromiter((len(pl.neighbors) for pl in payloads), dtype=np.int64, count=n_rows)
    indptr = np.concatenate(([0], np.cumsum(lengths)))
    indices = np.concatenate([pl.neighbors for pl in payloads]) if n_rows else np.zeros(0, np.int64)
    return sps.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n_rows, n_cols))


def edge_local_counts(g: BipartiteGraph, payloads, p: int, q: int, mu: float, correction: str):
    """Per-user ``(f, s, raw)`` for the edge-LDP baseline."""
    if p == 2:
        return _edge_counts_pair(g, payloads, q, mu, correction)
    return _edge_counts_general(g, payloads, p, q, mu, correction)


def _fsum_by(rows, weights, n):
    # bincount returns int64 when there are no rows at all
    return np.bincount(rows, weights, minlength=n).astype(float)


def _edge_counts_pair(g, payloads, q, mu, correction):
    n = g.n_upper
    a = g.cached("biadj", g.biadjacency).astype(float)
    noisy = _noisy_matrix(payloads, n, g.n_lower)
    common = sps.triu(a @ noisy.T, k=1).tocsr()
    deg = np.array([len(r) for r in g.upper_adj], dtype=float)
    above = n - 1 - np.arange(n, dtype=float)
    nnz = np.diff(common.indptr)
    rows = np.repeat(np.arange(n), nnz)
    c = common.data
    d = deg[rows]
    zeros = above - nnz  # co-members sharing no noisy edge with the user's neighborhood

    f = _fsum_by(rows, fcomb(c, q), n) + zeros * fcomb(0, q)
    s = _fsum_by(rows, fcomb(c, q - 1) * (d - c), n) + zeros * fcomb(0, q - 1) * deg
    if correction == "first_order":
        raw = f - mu * s
    else:
        raw = _fsum_by(rows, _signed_product_sum(c, d, q, 1 - mu, -mu), n)
        raw += zeros * _signed_product_sum(0, deg, q, 1 - mu, -mu)
    return f, s, raw


def _edge_counts_general(g, payloads, p, q, mu, correction):
    n = g.n_upper
    noisy = _noisy_matrix(payloads, n, g.n_lower).toarray()
    f = np.zeros(n)
    s = np.zeros(n)
    raw = np.zeros(n)
    for i, row in enumerate(g.upper_adj):
        if len(row) < q or n - 1 - i < p - 1:
            continue
        ys = np.array(list(combinations(range(len(row)), q)))
        sub = noisy[i + 1 :, list(row)]  # co-members x > i, restricted to N(i)
        # counts[Y, x] = noisy edges present between x and the lower set Y
        counts = sub[:, ys].sum(axis=2).T.astype(np.int64)
        full = (counts == q).sum(axis=1)
        near = (counts == q - 1).sum(axis=1)
        f[i] = fcomb(full, p - 1).sum()
        s[i] = (near * fcomb(full, p - 2)).sum()
        if correction == "first_order":
            raw[i] = f[i] - mu * s[i]
        else:
            vals = (1 - mu) ** counts * (-mu) ** (q - counts)
            esym = np.zeros((len(ys), p))
            esym[:, 0] = 1.0
            for col in vals.T:
                esym[:, 1:] += esym[:, :-1] * col[:, None]
            raw[i] = esym[:, p - 1].sum()
    return f, s, raw


def _star_queries(g: BipartiteGraph, k: int):
    def build():
        lists = _star_lists(g, k)
        owner = np.concatenate([np.full(ks.t, i, dtype=np.int64) for i, ks in enumerate(lists)] or [np.zeros(0, np.int64)])
        ranks = np.concatenate([ks.ranks() for ks in lists] or [np.zeros(0, np.int64)])
        return owner, ranks

    return g.cached(("star-queries", k), build)


def kstars_local_counts(g: BipartiteGraph, payloads, p: int, params: PrivacyParams):
    """Per-user ``(f, s, raw)`` for the k-stars algorithm.

    For each true star Y of user i, ``m`` is the number of users x > i whose
    noisy list contains Y; every per-configuration quantity depends on Y only
    through ``m``.
    """
    n = g.n_upper
    k = params.k
    mu = params.mu
    q_owner, q_rank = _star_queries(g, k)
    # collector-side inverted index: sorted (rank, owner) keys
    if payloads and math.comb(g.n_lower, k) * n >= 2**63:
        raise ValueError("star domain too large for the inverted index")
    keys = np.sort(np.concatenate([pl.ranks * n + x for x, pl in enumerate(payloads)] or [np.zeros(0, np.int64)]))
    base = q_rank * n
    m = (np.searchsorted(keys, base + n, side="left") - np.searchsorted(keys, base + q_owner, side="right")).astype(float)
    above = (n - 1 - q_owner).astype(float)

    w = 1.0 / params.rho if params.sampling_rescale else 1.0
    f_y = fcomb(m, p - 1) * w ** (p - 1)
    s_y = fcomb(m, p - 2) * (above - (p - 2)) * w ** (p - 2)
    s_y = np.where(above >= p - 1, s_y, 0.0)
    if params.correction == "first_order":
        raw_y = f_y - mu * s_y
    else:
        raw_y = _signed_product_sum(m, above, p - 1, w - mu, -mu)
    f = _fsum_by(q_owner, f_y, n)
    s = _fsum_by(q_owner, s_y, n)
    raw = _fsum_by(q_owner, raw_y, n)
    return f, s, raw


# -- drivers -----------------------------------------------------------------


def _report(g, algorithm, p, q, params, seed, transcript, f, s, raw, with_truth):
    local = finalize_local(raw, params.mu, _exponent(algorithm, p, q), params.abs_correction)
    return EstimateReport(
        algorithm=algorithm,
        p=p,
        q=q,
        params=params,
        seed=seed,
        owners=tuple(g.upper_ids),
        f=tuple(f.tolist()),
        s=tuple(s.tolist()),
        raw=tuple(raw.tolist()),
        local=tuple(local.tolist()),
        payload_sizes=tuple(len(pl) for pl in transcript.payloads),
        true_count=count_pq_cliques(g, p, q) if with_truth else None,
        transcript=transcript,
    )


def run_edge_ldp(
    g: BipartiteGraph, p: int, q: int, params: PrivacyParams, seed: int, with_truth: bool = False
) -> EstimateReport:
    """Edge-LDP baseline: RR on every user's edge neighbor list."""
    if p < 2 or q < 1:
        raise ValueError(f"edge LDP needs p >= 2 and q >= 1 (got p={p}, q={q})")
    transcript = round_one_edge(g, params, seed)
    f, s, raw = edge_local_counts(g, transcript.payloads, p, q, params.mu, params.correction)
    return _report(g, EDGE, p, q, params, seed, transcript, f, s, raw, with_truth)


def run_kstars_ldp(
    g: BipartiteGraph,
    p: int,
    q: int,
    params: PrivacyParams,
    seed: int,
    with_truth: bool = False,
    star_domain: str = "full",
) -> EstimateReport:
    """k-stars algorithm: RR on every user's q-stars list, k must equal q.

    ``star_domain="active"`` restricts the star domain to lower nodes that
    have at least one edge.
    """
    if p < 2:
        raise ValueError(f"k-stars LDP needs p >= 2 (got p={p})")
    if params.k != q:
        raise ValueError(f"k-stars counting composes q-stars: set k = q (got k={params.k}, q={q})")
    if star_domain == "active":
        g = drop_isolated_lower(g)
    elif star_domain != "full":
        raise ValueError(f"star_domain must be 'full' or 'active', got {star_domain!r}")
    transcript = round_one_kstars(g, params, seed)
    f, s, raw = kstars_local_counts(g, transcript.payloads, p, params)
    return _report(g, KSTARS, p, q, params, seed, transcript, f, s, raw, with_truth)


def run(algorithm: str, g: BipartiteGraph, p: int, q: int, params: PrivacyParams, seed: int, **kw) -> EstimateReport:
    if algorithm == EDGE:
        return run_edge_ldp(g, p, q, params, seed, **kw)
    if algorithm == KSTARS:
        return run_kstars_ldp(g, p, q, params, seed, **kw)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def drop_isolated_lower(g: BipartiteGraph) -> BipartiteGraph:
    def build():
        keep = [j for j, a in enumerate(g.lower_adj) if a]
        remap = {j: t for t, j in enumerate(keep)}
        return BipartiteGraph(
            g.upper_ids,
            tuple(g.lower_ids[j] for j in keep),
            tuple(tuple(remap[j] for j in row) for row in g.upper_adj),
            tuple(g.lower_adj[j] for j in keep),
        )

    return g.cached("active-lower", build)


def simulate(
    g: BipartiteGraph,
    algorithm: str,
    p: int,
    q: int,
    params: PrivacyParams,
    trials: int,
    master_seed: int,
    **kw,
) -> list[EstimateReport]:
    """Independent protocol runs with per-trial seeds derived from ``master_seed``."""
    reports = []
    for t in range(trials):
        rep = run(algorithm, g, p, q, params, derive_seed(master_seed, t), **kw)
        reports.append(replace(rep, transcript=None))
    return reports


# -- transcript log ----------------------------------------------------------

_HEADER = "# pq-clique LDP transcript v1"


def transcript_log(report: EstimateReport, path: str | Path) -> None:
    """Write an audit log: run settings, round-one payload sizes, per-user rows.

    Floats are written with ``repr`` so :func:`load_transcript` recovers an
    identical report; owners are JSON-encoded to keep their type.
    """
    lines = [_HEADER]
    meta = {
        "algorithm": report.algorithm,
        "p": report.p,
        "q": report.q,
        "seed": report.seed,
        "true_count": report.true_count,
        "params": {fl.name: getattr(report.params, fl.name) for fl in fields(report.params)},
    }
    for key, value in meta.items():
        lines.append(f"{key}\t{json.dumps(value, sort_keys=True)}")
    lines.append(f"aggregate\t{report.aggregate!r}")
    lines.append("[users]")
    lines.append("owner\tpayload_size\tf\ts\traw\tlocal")
    for row in zip(report.owners, report.payload_sizes, report.f, report.s, report.raw, report.local):
        owner, size, *vals = row
        lines.append("\t".join([json.dumps(owner), str(size), *map(repr, vals)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_transcript(path: str | Path) -> EstimateReport:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != _HEADER:
        raise ValueError(f"{path}: not a transcript log")
    meta = {}
    idx = 1
    while text[idx] != "[users]":
        key, _, value = text[idx].partition("\t")
        if key != "aggregate":
            meta[key] = json.loads(value)
        idx += 1
    cols: list[list] = [[] for _ in range(6)]
    for line in text[idx + 2 :]:
        parts = line.split("\t")
        cols[0].append(json.loads(parts[0]))
        cols[1].append(int(parts[1]))
        for c in range(2, 6):
            cols[c].append(float(parts[c]))
    return EstimateReport(
        algorithm=meta["algorithm"],
        p=meta["p"],
        q=meta["q"],
        params=PrivacyParams(**meta["params"]),
        seed=meta["seed"],
        owners=tuple(cols[0]),
        f=tuple(cols[2]),
        s=tuple(cols[3]),
        raw=tuple(cols[4]),
        local=tuple(cols[5]),
        payload_sizes=tuple(cols[1]),
        true_count=meta["true_count"],
    )
