from __future__ import annotations

import pytest
from hypothesis import assume, given, strategies as st

from pqldp.graph import (
    BipartiteGraph,
    GraphFormatError,
    complete_bipartite,
    degree,
    edge_neighbor_list,
    induced_random_subgraph,
    load_edge_list,
    random_bipartite,
    read_layer_map,
    write_edge_list,
)

from conftest import bipartite_graphs


def _write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_k22_first_column(tmp_path):
    g = load_edge_list(_write(tmp_path, "u1 l1\nu1 l2\nu2 l1\nu2 l2\n"))
    assert (g.n_upper, g.n_lower, g.m_edges) == (2, 2, 4)


def test_load_skips_comments_and_extra_columns(tmp_path):
    g = load_edge_list(_write(tmp_path, "% konect header\n# snap comment\nu1 l1 1 17\n\nu2 l1\n"))
    assert g.m_edges == 2 and g.upper_ids == ("u1", "u2")


@pytest.mark.parametrize("text", ["", "# only a comment\n"])
def test_zero_edges_rejected(tmp_path, text):
    with pytest.raises(GraphFormatError, match="zero edges"):
        load_edge_list(_write(tmp_path, text))


def test_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        load_edge_list(tmp_path / "missing.txt")


def test_first_column_violation_strict_and_lenient(tmp_path):
    # l1 and l2 both land in the lower layer, so the last line joins two lower nodes
    path = _write(tmp_path, "u1 l1\nu2 l2\nl1 l2\n")
    with pytest.raises(GraphFormatError):
        load_edge_list(path)
    g = load_edge_list(path, strict=False)
    assert g.m_edges == 2 and g.dropped_edges == 1


def test_layer_map(tmp_path):
    edges = _write(tmp_path, "a x\ny b\n")
    lm = _write(tmp_path, "a\tU\nb\tU\nx\tL\ny\tL\niso\tU\n", "layers.tsv")
    g = load_edge_list(edges, str(lm))
    assert g.upper_ids == ("a", "b", "iso") and g.lower_ids == ("x", "y")
    assert g.has_edge("b", "y") and degree(g, "iso") == 0


def test_layer_map_conflict(tmp_path):
    lm = _write(tmp_path, "a\tU\na\tL\n", "layers.tsv")
    with pytest.raises(GraphFormatError):
        read_layer_map(lm)


def test_within_layer_edge_under_map(tmp_path):
    edges = _write(tmp_path, "a b\na x\n")
    mapping = {"a": "U", "b": "U", "x": "L"}
    with pytest.raises(GraphFormatError):
        load_edge_list(edges, mapping)
    assert load_edge_list(edges, mapping, strict=False).dropped_edges == 1


def test_random_bipartition_deterministic(tmp_path):
    path = _write(tmp_path, "\n".join(f"{i} {j}" for i in range(6) for j in range(6, 12)) + "\n")
    a = load_edge_list(path, "random:3", strict=False)
    b = load_edge_list(path, "random:3", strict=False)
    assert a == b and a.n_upper + a.n_lower == 12


def test_ids_in_both_layers_rejected():
    with pytest.raises(GraphFormatError):
        BipartiteGraph.from_edges([("a", "b"), ("b", "c")])


@pytest.mark.parametrize("v", ["u0", "u2", "l1"])
def test_degree_k33(k33, v):
    assert degree(k33, v) == 3


def test_degree_star_and_isolated():
    g = BipartiteGraph.from_edges([("c", f"l{j}") for j in range(5)], ["c", "alone"])
    assert degree(g, "c") == 5 and degree(g, "alone") == 0
    with pytest.raises(KeyError):
        degree(g, "nobody")


def test_edge_neighbor_list_is_own_row(k33):
    row = edge_neighbor_list(k33, "u1")
    assert row.bits == (0, 1, 2) and row.domain == 3


@given(bipartite_graphs())
def test_degree_sums_match_edge_count(g):
    assert sum(degree(g, u) for u in g.upper_ids) == g.m_edges
    assert sum(degree(g, v) for v in g.lower_ids) == g.m_edges


@given(bipartite_graphs())
def test_round_trip(tmp_path_factory, g):
    assume(g.m_edges > 0)
    d = tmp_path_factory.mktemp("rt")
    write_edge_list(g, d / "e.txt", d / "l.tsv")
    back = load_edge_list(d / "e.txt", str(d / "l.tsv"))
    assert back.edge_set() == g.edge_set()
    assert set(back.upper_ids) == set(g.upper_ids) and set(back.lower_ids) == set(g.lower_ids)


def test_induced_full_selection(k33):
    assert induced_random_subgraph(k33, 6, seed=11).edge_set() == k33.edge_set()


def test_induced_two_nodes_deterministic(k33):
    a = induced_random_subgraph(k33, 2, seed=5)
    assert a == induced_random_subgraph(k33, 2, seed=5)
    assert a.n_upper == 1 and a.n_lower == 1 and a.m_edges in (0, 1)


def test_induced_seeds_differ():
    g = random_bipartite(500, 500, 0.01, seed=1)
    a = induced_random_subgraph(g, 500, seed=1)
    b = induced_random_subgraph(g, 500, seed=2)
    assert a.m_edges != b.m_edges or a.edge_set() != b.edge_set()


@pytest.mark.parametrize("n", [0, 7, -1])
def test_induced_out_of_range(k33, n):
    with pytest.raises(ValueError):
        induced_random_subgraph(k33, n, seed=0)


@given(bipartite_graphs(max_nodes=14, min_upper=2, min_lower=2), st.integers(0, 2**32), st.data())
def test_induced_is_subgraph(g, seed, data):
    n = data.draw(st.integers(1, g.n_nodes))
    sub = induced_random_subgraph(g, n, seed)
    assert sub.n_nodes == n
    assert sub.edge_set() <= g.edge_set()
    # induced: every original edge between kept nodes survives
    kept_u, kept_l = set(sub.upper_ids), set(sub.lower_ids)
    assert {(u, v) for u, v in g.edge_set() if u in kept_u and v in kept_l} == sub.edge_set()


def test_swap_layers(k33):
    g = random_bipartite(3, 5, 0.5, seed=2)
    s = g.swap_layers()
    assert s.n_upper == 5 and {(b, a) for a, b in g.edge_set()} == s.edge_set()
    assert complete_bipartite(2, 4).swap_layers().n_upper == 4
