import itertools

import pytest
from hypothesis import given, strategies as st

from cplab.butterfly import (
    ButterflyGraph,
    EdgeId,
    MultiInstance,
    Rectangle,
    digit_reverse,
    edge_rectangle,
    node_vector,
    path_edges,
    path_nodes,
    stabbing_pairs_oracle,
    vector_index,
)


def test_node_vector_worked_values():
    assert node_vector(2, 3, 2) == (0, 1, 0)
    assert node_vector(1, 3, 2) == (1, 0, 0)
    assert node_vector(0, 4, 3) == (0, 0, 0, 0)


def test_node_vector_out_of_range():
    with pytest.raises(ValueError):
        node_vector(8, 3, 2)
    with pytest.raises(ValueError):
        node_vector(-1, 3, 2)


def test_digit_reverse_worked_values():
    assert digit_reverse(4, 3, 2) == 1
    assert digit_reverse(2, 2, 2) == 1
    assert digit_reverse(0, 5, 3) == 0


def test_digit_reverse_keeps_leading_zeros():
    # 1 = (1,0,0) in base 2 with three digits reverses to (0,0,1) = 4
    assert digit_reverse(1, 3, 2) == 4
    assert digit_reverse(1, 2, 3) == 3


@given(st.integers(2, 5), st.integers(1, 5), st.data())
def test_digit_reverse_involution(B, d, data):
    x = data.draw(st.integers(0, B**d - 1))
    assert digit_reverse(digit_reverse(x, d, B), d, B) == x
    assert vector_index(node_vector(x, d, B), B) == x


def test_graph_shape():
    g = ButterflyGraph(2, 3)
    assert g.width == 8
    assert g.num_edges == 3 * 2**4
    assert len(list(g.edges())) == g.num_edges
    for level in range(g.depth):
        for v in range(g.width):
            assert len(g.out_edges(level, v)) == 2
            assert len(g.in_edges(level + 1, v)) == 2
            for e in g.in_edges(level + 1, v):
                assert g.edge_target(e) == v


def test_edge_position_matches_enumeration():
    g = ButterflyGraph(3, 2)
    for pos, e in enumerate(g.edges()):
        assert g.edge_position(e) == pos


def test_path_through_example_edge():
    g = ButterflyGraph(2, 3)
    nodes = path_nodes(2, 1, g)
    assert [node_vector(v, 3, 2) for v in nodes] == [(0, 1, 0), (1, 1, 0), (1, 0, 0), (1, 0, 0)]
    edges = path_edges(2, 1, g)
    assert EdgeId(1, vector_index((1, 1, 0), 2), 0) in edges
    assert len(edges) == 3


def test_identical_source_sink_gives_self_edges():
    g = ButterflyGraph(3, 3)
    for v in (0, 5, 26):
        vec = node_vector(v, 3, 3)
        edges = path_edges(v, v, g)
        assert all(e.from_index == v and e.to_digit == vec[e.level] for e in edges)


def _brute_force_path(s, t_hat, g):
    """Search the DAG for every s -> t_hat path."""
    paths = [[s]]
    for level in range(g.depth):
        paths = [p + [g.edge_target(e)] for p in paths for e in g.out_edges(level, p[-1])]
    return [p for p in paths if p[-1] == t_hat]


@pytest.mark.parametrize("B,d", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_paths_are_unique_and_match_routing(B, d):
    g = ButterflyGraph(B, d)
    for s in range(g.width):
        for t in range(g.width):
            found = _brute_force_path(s, t, g)
            assert len(found) == 1
            assert found[0] == path_nodes(s, t, g)
            assert path_nodes(s, t, g)[-1] == t


def test_edge_rectangle_example_edge():
    e = EdgeId(1, vector_index((1, 1, 0), 2), 0)
    assert edge_rectangle(e, 3, 3, 2) == Rectangle(2, 3, 4, 5)
    assert stabbing_pairs_oracle(e, 3, 3, 2) == {(s, t) for s in (2, 3) for t in (4, 5)}


def test_edge_rectangle_zero_self_edge():
    assert edge_rectangle(EdgeId(0, 0, 0), 3, 3, 2) == Rectangle(0, 0, 0, 3)


def test_edge_rectangle_top_level_widths():
    B, d = 3, 3
    for frm in (0, 7, 26):
        r = edge_rectangle(EdgeId(d - 1, frm, 1), d, d, B)
        assert r.s_hi - r.s_lo + 1 == B ** (d - 1)
        assert r.t_hi - r.t_lo + 1 == 1


def test_edge_rectangle_errors():
    with pytest.raises(ValueError):
        edge_rectangle(EdgeId(0, 0, 0), 3, 2, 2)
    with pytest.raises(ValueError):
        edge_rectangle(EdgeId(3, 0, 0), 3, 3, 2)
    with pytest.raises(ValueError):
        stabbing_pairs_oracle(EdgeId(0, 0, 0), 1, 13, 2)


@pytest.mark.parametrize("B,ell", [(2, 3), (3, 2)])
def test_each_level_chunk_partitions_queries(B, ell):
    inst = MultiInstance(ell, B)
    U = inst.universe
    for i in range(1, ell + 1):
        g = inst.graph(i)
        for level in range(g.depth):
            cover = {}
            for frm in range(g.width):
                for w in range(B):
                    for pair in stabbing_pairs_oracle(EdgeId(level, frm, w), i, ell, B):
                        cover[pair] = cover.get(pair, 0) + 1
            assert len(cover) == U * U
            assert set(cover.values()) == {1}


@pytest.mark.parametrize("B,ell", [(2, 2), (3, 2)])
def test_every_edge_is_stabbed_by_its_area(B, ell):
    inst = MultiInstance(ell, B)
    for i in range(1, ell + 1):
        for e in inst.graph(i).edges():
            pairs = stabbing_pairs_oracle(e, i, ell, B)
            assert len(pairs) == edge_rectangle(e, i, ell, B).area > 0


def test_multi_instance_counts():
    inst = MultiInstance(3, 2)
    assert inst.depths == [3, 2, 1]
    assert [inst.edge_count(i) for i in (3, 2, 1)] == [48, 16, 4]
    assert inst.total_edges == 68
    assert inst.delta == 6


def test_example_query_decomposition():
    inst = MultiInstance(3, 2)
    assert inst.source_sink(3, 2, 4) == (2, 1)
    assert inst.source_sink(2, 2, 4) == (1, 1)
    assert inst.source_sink(1, 2, 4) == (0, 1)


def test_rectangle_requires_nonempty():
    with pytest.raises(ValueError):
        Rectangle(3, 2, 0, 0)


def test_all_edges_have_consistent_targets():
    for B, d in itertools.product((2, 3), (1, 2)):
        g = ButterflyGraph(B, d)
        for e in g.edges():
            tgt = node_vector(g.edge_target(e), d, B)
            src = node_vector(e.from_index, d, B)
            assert tgt[e.level] == e.to_digit
            assert all(tgt[k] == src[k] for k in range(d) if k != e.level)
