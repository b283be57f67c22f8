"""Shared helpers for distributional tests of randomized response."""

from __future__ import annotations

import numpy as np
from scipy import stats


def subset_code(members) -> int:
    return int(sum(1 << int(m) for m in members))


def exact_subset_probs(true_set, domain: int, mu: float) -> np.ndarray:
    """Per-bit product probabilities of every output subset, by bitmask."""
    probs = np.empty(1 << domain)
    truth = subset_code(true_set)
    for mask in range(1 << domain):
        flips = bin(mask ^ truth).count("1")
        probs[mask] = mu**flips * (1 - mu) ** (domain - flips)
    return probs


def pooled_chisquare(observed: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    """Goodness-of-fit after pooling sparse cells into one bucket."""
    big = expected >= min_expected
    obs = np.append(observed[big], observed[~big].sum())
    exp = np.append(expected[big], expected[~big].sum())
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    return stats.chisquare(obs, exp * obs.sum() / exp.sum())


def sparse_vs_dense_pvalues(true_set, domain, mu, trials, seed):
    """Sparse and dense RR each tested against the exact law, plus against each other."""
    from pqldp.mechanism import dense_rr, sparse_rr

    rng_s = np.random.default_rng(seed)
    rng_d = np.random.default_rng(seed + 1)
    truth_bits = [int(i in set(true_set)) for i in range(domain)]
    sparse_counts = np.zeros(1 << domain)
    dense_counts = np.zeros(1 << domain)
    for _ in range(trials):
        sparse_counts[subset_code(sparse_rr(true_set, domain, mu, rng_s))] += 1
        bits = dense_rr(truth_bits, mu, rng_d)
        dense_counts[subset_code(i for i, b in enumerate(bits) if b)] += 1
    expected = exact_subset_probs(true_set, domain, mu) * trials
    p_sparse = pooled_chisquare(sparse_counts, expected).pvalue
    p_dense = pooled_chisquare(dense_counts, expected).pvalue
    # two-sample test on cells with enough mass; the rest pooled into one cell
    big = (sparse_counts + dense_counts) >= 10
    table = np.vstack(
        [
            np.append(sparse_counts[big], sparse_counts[~big].sum()),
            np.append(dense_counts[big], dense_counts[~big].sum()),
        ]
    )
    table = table[:, table.sum(axis=0) > 0]
    p_two = stats.chi2_contingency(table)[1]
    return p_sparse, p_dense, p_two
