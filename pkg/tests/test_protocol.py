from __future__ import annotations

import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqldp.graph import BipartiteGraph, complete_bipartite, random_bipartite
from pqldp.mechanism import PrivacyParams, flip_prob
from pqldp.metrics import RunningStats
from pqldp.oracle import count_pq_cliques
from pqldp.protocol import (
    edge_local_counts,
    finalize_local,
    kstars_local_counts,
    load_transcript,
    round_one_edge,
    round_one_kstars,
    run,
    run_edge_ldp,
    run_kstars_ldp,
    simulate,
    transcript_log,
)
from pqldp.stars import unrank_subset

from conftest import bipartite_graphs, random_corpus

NOISELESS = float("inf")


def brute_edge_locals(g, noisy_rows, p, q, mu):
    """Direct enumeration of f, s and the exact product expansion for each user."""
    nu = g.n_upper
    f, s, raw = np.zeros(nu), np.zeros(nu), np.zeros(nu)
    for i in range(nu):
        for ys in combinations(g.upper_adj[i], q):
            for xs in combinations(range(i + 1, nu), p - 1):
                bits = [int(y in noisy_rows[x]) for x in xs for y in ys]
                absent = len(bits) - sum(bits)
                f[i] += absent == 0
                s[i] += absent == 1
                raw[i] += math.prod(b - mu for b in bits)
    return f, s, raw


def brute_kstars_locals(g, noisy_sets, p, q, mu, w):
    nu = g.n_upper
    f, s, raw = np.zeros(nu), np.zeros(nu), np.zeros(nu)
    for i in range(nu):
        for ys in combinations(g.upper_adj[i], q):
            later = range(i + 1, nu)
            for xs in combinations(later, p - 1):
                bits = [w * (ys in noisy_sets[x]) for x in xs]
                f[i] += math.prod(bits)
                raw[i] += math.prod(b - mu for b in bits)
            # (p-2)-subsets of co-members, each weighted by the co-members left out
            for xs in combinations(later, p - 2):
                s[i] += math.prod(w * (ys in noisy_sets[x]) for x in xs) * (len(later) - (p - 2))
    return f, s, raw


@settings(max_examples=40)
@given(bipartite_graphs(max_nodes=10), st.integers(2, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_edge_local_counts_match_enumeration(g, p, q, seed):
    params = PrivacyParams(0.8)
    tr = round_one_edge(g, params, seed)
    rows = [set(pl.neighbors.tolist()) for pl in tr.payloads]
    bf, bs, braw = brute_edge_locals(g, rows, p, q, params.mu)
    f, s, raw = edge_local_counts(g, tr.payloads, p, q, params.mu, "exact")
    np.testing.assert_allclose(f, bf)
    np.testing.assert_allclose(s, bs)
    np.testing.assert_allclose(raw, braw, atol=1e-9)
    _, _, first = edge_local_counts(g, tr.payloads, p, q, params.mu, "first_order")
    np.testing.assert_allclose(first, bf - params.mu * bs, atol=1e-9)


@settings(max_examples=40)
@given(
    bipartite_graphs(max_nodes=10),
    st.integers(2, 3),
    st.integers(1, 3),
    st.sampled_from([1.0, 0.7]),
    st.booleans(),
    st.integers(0, 2**31),
)
def test_kstars_local_counts_match_enumeration(g, p, q, rho, rescale, seed):
    params = PrivacyParams(0.8, k=q, rho=rho, sampling_rescale=rescale)
    tr = round_one_kstars(g, params, seed)
    sets = [{unrank_subset(int(r), q) for r in pl.ranks} for pl in tr.payloads]
    w = 1 / rho if rescale else 1.0
    bf, bs, braw = brute_kstars_locals(g, sets, p, q, params.mu, w)
    f, s, raw = kstars_local_counts(g, tr.payloads, p, params)
    np.testing.assert_allclose(f, bf)
    np.testing.assert_allclose(s, bs)
    np.testing.assert_allclose(raw, braw, atol=1e-9)


@pytest.mark.parametrize("algorithm", ["edge", "kstars"])
@pytest.mark.parametrize("correction", ["exact", "first_order"])
def test_noiseless_degeneracy(algorithm, correction):
    for g in random_corpus(25, 20, seed=4):
        for p in (2, 3):
            for q in (2, 3):
                params = PrivacyParams(NOISELESS, k=q, correction=correction)
                rep = run(algorithm, g, p, q, params, seed=1)
                assert rep.aggregate == count_pq_cliques(g, p, q)


def test_single_counting_at_zero_noise():
    g = complete_bipartite(4, 3)
    rep = run_kstars_ldp(g, 2, 2, PrivacyParams(NOISELESS, k=2), seed=0)
    # user i sees cliques with partners x > i only: 3 pairs of lower nodes times (3, 2, 1, 0) partners
    assert rep.local == (9.0, 6.0, 3.0, 0.0)


def test_input_validation():
    g = complete_bipartite(2, 2)
    with pytest.raises(ValueError):
        run_edge_ldp(g, 1, 2, PrivacyParams(1.0), 0)
    with pytest.raises(ValueError):
        run_kstars_ldp(g, 2, 3, PrivacyParams(1.0, k=2), 0)
    with pytest.raises(ValueError):
        run("node", g, 2, 2, PrivacyParams(1.0), 0)


def _mean_and_sem(g, algorithm, p, q, params, trials, seed):
    rs = RunningStats().extend(r.aggregate for r in simulate(g, algorithm, p, q, params, trials, seed))
    return rs.mean, rs.sem()


@pytest.mark.parametrize("algorithm", ["edge", "kstars"])
def test_k22_unbiased(algorithm):
    mean, sem = _mean_and_sem(complete_bipartite(2, 2), algorithm, 2, 2, PrivacyParams(1.0, k=2), 10**4, 17)
    assert abs(mean - 1) < 3 * sem


def test_kstars_sparse_q3_unbiased():
    g = random_bipartite(10, 10, 0.35, seed=12)
    truth = count_pq_cliques(g, 2, 3)
    mean, sem = _mean_and_sem(g, "kstars", 2, 3, PrivacyParams(0.5, k=3), 10**4, 5)
    assert abs(mean - truth) < 3 * sem


def test_kstars_variance_matches_closed_form():
    # at p=2 each noisy star bit contributes independently: var = v * sum over (x, Y) of c_<x(Y)^2
    g = random_bipartite(8, 8, 0.4, seed=2)
    params = PrivacyParams(1.0, k=2)
    mu = params.mu
    v = mu * (1 - mu) / (1 - 2 * mu) ** 2
    total = 0
    for x in range(g.n_upper):
        xs = set(g.upper_adj[x])
        for ys in combinations(range(g.n_lower), 2):
            c = sum(1 for i in range(x) if set(ys) <= set(g.upper_adj[i]))
            total += c * c
    reps = simulate(g, "kstars", 2, 2, params, 6000, 3)
    var = RunningStats().extend(r.aggregate for r in reps).variance()
    # sample variance of 6000 draws: relative sd is about sqrt(2/6000) plus kurtosis slack
    assert var == pytest.approx(v * total, rel=0.12)


def test_first_order_bias_at_q2_edge():
    # the single-term correction leaves a positive bias for (p-1)q >= 2
    g = random_bipartite(8, 8, 0.4, seed=2)
    truth = count_pq_cliques(g, 2, 2)
    params = PrivacyParams(1.0, correction="first_order")
    mean, sem = _mean_and_sem(g, "edge", 2, 2, params, 4000, 8)
    assert mean - truth > 4 * sem


def test_finalize_local_abs_identity():
    raw = np.array([-2.0, 0.0, 3.5])
    out = finalize_local(raw, 0.25, 2, abs_correction=True)
    np.testing.assert_array_equal(out, [0.0, 0.0, 3.5 / 0.25])
    np.testing.assert_array_equal(finalize_local(raw, 0.25, 2, False), raw / 0.25)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(0.01, 0.49), st.integers(1, 6))
def test_abs_correction_property(raw, mu, exponent):
    raw = np.array(raw)
    plain = finalize_local(raw, mu, exponent, False)
    fixed = finalize_local(raw, mu, exponent, True)
    assert np.all(fixed[raw >= 0] == plain[raw >= 0])
    assert np.all(fixed[raw < 0] == 0)


def test_abs_correction_on_empty_graph():
    g = BipartiteGraph.from_edges([], ["u0", "u1", "u2"], ["l0", "l1"])
    for alg in ("edge", "kstars"):
        rep = run(alg, g, 2, 2, PrivacyParams(0.5, k=2, abs_correction=True), seed=3)
        assert rep.aggregate == 0


def test_sampling_with_rescale_unbiased():
    g = random_bipartite(8, 8, 0.4, seed=2)
    truth = count_pq_cliques(g, 2, 2)
    mean, sem = _mean_and_sem(g, "kstars", 2, 2, PrivacyParams(1.0, k=2, rho=0.9), 10**4, 21)
    assert abs(mean - truth) < 4 * sem


def test_active_star_domain_same_in_noiseless_mode():
    g = BipartiteGraph.from_edges([("a", "x"), ("a", "y"), ("b", "x"), ("b", "y")], lower_ids=["x", "y", "z"])
    rep = run_kstars_ldp(g, 2, 2, PrivacyParams(NOISELESS, k=2), 0, star_domain="active")
    assert rep.aggregate == 1
    with pytest.raises(ValueError):
        run_kstars_ldp(g, 2, 2, PrivacyParams(1.0, k=2), 0, star_domain="bogus")


@pytest.mark.parametrize("algorithm", ["edge", "kstars"])
def test_transcript_round_trip(tmp_path, algorithm):
    g = complete_bipartite(2, 2)
    rep = run(algorithm, g, 2, 2, PrivacyParams(1.0, k=2, rho=0.8), seed=42, with_truth=True)
    path = tmp_path / "t.log"
    transcript_log(rep, path)
    back = load_transcript(path)
    assert back == rep and back.aggregate == rep.aggregate
    again = tmp_path / "t2.log"
    transcript_log(run(algorithm, g, 2, 2, PrivacyParams(1.0, k=2, rho=0.8), seed=42, with_truth=True), again)
    assert path.read_bytes() == again.read_bytes()


def test_transcript_seeds_differ(tmp_path):
    g = random_bipartite(6, 6, 0.5, seed=1)
    a = run_edge_ldp(g, 2, 2, PrivacyParams(1.0), seed=1)
    b = run_edge_ldp(g, 2, 2, PrivacyParams(1.0), seed=2)
    assert a.f != b.f


def test_transcript_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.log"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        load_transcript(p)


def test_report_fields():
    g = complete_bipartite(3, 3)
    rep = run_edge_ldp(g, 2, 2, PrivacyParams(2.0), seed=4, with_truth=True)
    assert rep.true_count == 9 and rep.correction_exponent == 2
    assert rep.bias == pytest.approx(rep.aggregate - 9)
    assert len(rep.payload_sizes) == g.n_upper
    assert flip_prob(2.0) == rep.params.mu
