"""Private (p,q)-clique counting in bipartite graphs under local differential privacy."""

from .graph import BipartiteGraph, load_edge_list, induced_random_subgraph, degree
from .mechanism import PrivacyParams, flip_prob, privacy_ratio, rr_bit, sparse_rr
from .oracle import count_pq_cliques, count_1q_2q, verify_lemma1
from .stars import ks_neighboring_list, perturb_stars, edge_budget_equivalent, avg_flip_factor_oracle
from .protocol import run_edge_ldp, run_kstars_ldp, transcript_log, load_transcript
from .metrics import l2_loss, relative_error, variance_bound

__all__ = [
    "BipartiteGraph",
    "load_edge_list",
    "induced_random_subgraph",
    "degree",
    "PrivacyParams",
    "flip_prob",
    "privacy_ratio",
    "rr_bit",
    "sparse_rr",
    "count_pq_cliques",
    "count_1q_2q",
    "verify_lemma1",
    "ks_neighboring_list",
    "perturb_stars",
    "edge_budget_equivalent",
    "avg_flip_factor_oracle",
    "run_edge_ldp",
    "run_kstars_ldp",
    "transcript_log",
    "load_transcript",
    "l2_loss",
    "relative_error",
    "variance_bound",
]
