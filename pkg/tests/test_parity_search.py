import random

import pytest

from cplab.butterfly import ButterflyGraph, EdgeId, MultiInstance, edge_rectangle, path_edges
from cplab.parity_search import (
    ChunkPermutations,
    ParitySearchState,
    QuerySpec,
    SetOnceError,
    Update,
    build_meta_paths,
    check_meta_query,
    chunk_key,
    chunk_keys,
    epoch_updates,
    format_instance,
    lift_meta_query,
    parse_instance,
    reference_answers,
    sample_hard_distribution,
    trace_meta_path,
)


def rectangle_oracle(state, q):
    inst = state.instance
    bit = 0
    for i in range(1, inst.ell + 1):
        for e in inst.graph(i).edges():
            if edge_rectangle(e, i, inst.ell, inst.degree).contains(q.s, q.t):
                bit ^= state.weight(i, e)
    return bit


def test_unset_state_answers_zero():
    state = ParitySearchState(MultiInstance(3, 2))
    for s in range(8):
        for t in range(8):
            assert state.answer_query(QuerySpec(s, t)) == 0


def test_three_edge_path_parity():
    # only the depth-3 graph carries weight, so the smaller graphs contribute 0
    inst = MultiInstance(3, 2)
    state = ParitySearchState(inst)
    for e in path_edges(2, 1, inst.graph(3)):
        state.apply_update(3, e, 1)
    assert state.answer_query(QuerySpec(2, 4)) == 1


def test_set_once_rejected_and_state_unchanged():
    inst = MultiInstance(2, 2)
    state = ParitySearchState(inst)
    e = EdgeId(0, 1, 0)
    state.apply_update(2, e, 1)
    before = state.snapshot()
    with pytest.raises(SetOnceError):
        state.apply_update(2, e, 0)
    assert state.snapshot() == before
    # same edge id in another graph is a different edge
    state.apply_update(1, EdgeId(0, 1, 0), 1)


def test_invalid_update_rejected():
    state = ParitySearchState(MultiInstance(2, 2))
    with pytest.raises(ValueError):
        state.apply_update(3, EdgeId(0, 0, 0), 1)
    with pytest.raises(ValueError):
        state.apply_update(1, EdgeId(1, 0, 0), 1)
    with pytest.raises(ValueError):
        state.apply_update(1, EdgeId(0, 0, 0), 2)
    with pytest.raises(ValueError):
        state.answer_query(QuerySpec(4, 0))


def test_zero_weight_is_invisible():
    inst = MultiInstance(2, 3)
    state = ParitySearchState(inst)
    for e in inst.graph(2).edges():
        state.apply_update(2, e, 0)
    assert all(state.answer_query(QuerySpec(s, t)) == 0 for s in range(9) for t in range(9))


def test_single_weight_one_flips_exactly_its_rectangle():
    inst = MultiInstance(2, 3)
    e = EdgeId(1, 5, 2)
    rect = edge_rectangle(e, 2, 2, 3)
    state = ParitySearchState(inst)
    state.apply_update(2, e, 1)
    for s in range(9):
        for t in range(9):
            assert state.answer_query(QuerySpec(s, t)) == int(rect.contains(s, t))


@pytest.mark.parametrize("seed", range(6))
def test_reference_matches_rectangle_oracle(seed):
    rng = random.Random(seed)
    ell, B = rng.choice([(2, 2), (3, 2), (2, 3)])
    sample = sample_hard_distribution(seed, ell, B)
    state = ParitySearchState(sample.instance)
    updates = sample.updates()
    # check partially assigned states as well
    cut = rng.randrange(len(updates))
    for u in updates[:cut]:
        state.apply(u)
    U = sample.instance.universe
    for _ in range(20):
        q = QuerySpec(rng.randrange(U), rng.randrange(U))
        assert state.answer_query(q) == rectangle_oracle(state, q)


def test_hard_distribution_is_deterministic():
    a = sample_hard_distribution(7, 2, 2)
    b = sample_hard_distribution(7, 2, 2)
    assert a.updates() == b.updates() and a.query == b.query


def test_hard_distribution_epoch_sizes():
    sample = sample_hard_distribution(1, 3, 3)
    inst = sample.instance
    for i in (3, 2, 1):
        assert len(sample.epochs[i]) == i * 3 ** (i + 1) == inst.edge_count(i)
        assert {u.edge for u in sample.epochs[i]} == set(inst.graph(i).edges())
    assert [u.graph for u in sample.updates()][0] == 3


def test_hard_distribution_weights_are_fair():
    total = count = 0
    for seed in range(500):
        sample = sample_hard_distribution(seed, 2, 2)
        for u in sample.updates():
            total += u.weight
            count += 1
    # 500 * 20 = 10^4 draws
    assert count == 10_000
    assert abs(total / count - 0.5) <= 0.02


def test_identity_meta_paths_are_straight():
    g = ButterflyGraph(3, 2)
    pairs = build_meta_paths(g, ChunkPermutations.identity(g))
    assert pairs == [(v, v) for v in range(9)]
    for v in range(9):
        assert set(trace_meta_path(v, g, ChunkPermutations.identity(g))) == {v}


def test_swapped_chunk_exchanges_two_paths():
    g = ButterflyGraph(2, 3)
    ident = ChunkPermutations.identity(g)
    perms = dict(ident.perms)
    key = (1, (1, 0))  # level-1 chunk (1, *, 0): nodes 1 and 3
    perms[key] = (1, 0)
    swapped = ChunkPermutations(g, perms)
    for s in range(8):
        base = trace_meta_path(s, g, ident)
        new = trace_meta_path(s, g, swapped)
        if s in (1, 3):
            assert new[2] == (3 if s == 1 else 1)
            assert new[:2] == base[:2]
        else:
            assert new == base


@pytest.mark.parametrize("B,d", [(2, 3), (3, 2), (4, 2)])
def test_random_meta_paths_cover_each_vertex_once(B, d):
    g = ButterflyGraph(B, d)
    rng = random.Random(B * 10 + d)
    for _ in range(20):
        perms = ChunkPermutations.random(g, rng)
        paths = [trace_meta_path(s, g, perms) for s in range(g.width)]
        for level in range(d + 1):
            assert sorted(p[level] for p in paths) == list(range(g.width))


def test_chunk_count():
    g = ButterflyGraph(3, 3)
    keys = list(chunk_keys(g))
    assert len(keys) == len(set(keys)) == 3 * 3**2
    assert chunk_key(1, (4, 5, 6)) == (1, (4, 6))


def test_missing_chunk_permutation():
    g = ButterflyGraph(2, 2)
    with pytest.raises(KeyError):
        build_meta_paths(g, ChunkPermutations(g, {}))
    with pytest.raises(ValueError):
        ChunkPermutations(g, {(0, (0,)): (0, 0)})


def _random_meta(inst, i, seed):
    rng = random.Random(seed)
    g = inst.graph(i)
    pairs = build_meta_paths(g, ChunkPermutations.random(g, rng))
    return lift_meta_query(inst, i, pairs, rng)


def test_meta_query_all_zero():
    inst = MultiInstance(3, 2)
    state = ParitySearchState(inst)
    assert state.answer_meta_query(2, _random_meta(inst, 2, 0)) == 0


def test_depth_one_meta_query_is_xor_of_its_two_queries():
    inst = MultiInstance(2, 2)
    sample = sample_hard_distribution(4, 2, 2)
    state = ParitySearchState(inst)
    for u in sample.updates():
        state.apply(u)
    queries = _random_meta(inst, 1, 2)
    assert state.answer_meta_query(1, queries) == state.answer_query(queries[0]) ^ state.answer_query(queries[1])


def test_meta_query_single_weight_flips_once():
    inst = MultiInstance(3, 3)
    for seed in range(5):
        queries = _random_meta(inst, 2, seed)
        rng = random.Random(seed)
        e = rng.choice(list(inst.graph(2).edges()))
        state = ParitySearchState(inst)
        base = state.answer_meta_query(2, queries)
        state.apply_update(2, e, 1)
        flipped = state.answer_meta_query(2, queries)
        hits = sum(e in state.query_paths(q)[2] for q in queries)
        assert hits <= 1
        assert flipped == base ^ hits


def test_meta_query_full_coverage_flip():
    # an edge on a traced path flips the meta answer
    inst = MultiInstance(2, 2)
    g = inst.graph(2)
    perms = ChunkPermutations.random(g, random.Random(3))
    pairs = build_meta_paths(g, perms)
    queries = lift_meta_query(inst, 2, pairs)
    e = path_edges(*pairs[1], g)[1]
    state = ParitySearchState(inst)
    state.apply_update(2, e, 1)
    assert state.answer_meta_query(2, queries) == 1


def test_meta_query_equals_xor_of_answers():
    inst = MultiInstance(3, 2)
    sample = sample_hard_distribution(11, 3, 2)
    state = ParitySearchState(inst)
    for u in sample.updates():
        state.apply(u)
    queries = _random_meta(inst, 2, 5)
    expect = 0
    for q in queries:
        expect ^= state.answer_query(q)
    assert state.answer_meta_query(2, queries) == expect


def test_inconsistent_meta_query_rejected():
    inst = MultiInstance(2, 2)
    queries = _random_meta(inst, 2, 1)
    with pytest.raises(ValueError):
        check_meta_query(inst, 2, queries[:-1])
    swapped = [queries[1], queries[0]] + queries[2:]
    with pytest.raises(ValueError):
        check_meta_query(inst, 2, swapped)
    dup = list(queries)
    dup[1] = QuerySpec(dup[1].s, dup[0].t)
    with pytest.raises(ValueError):
        check_meta_query(inst, 2, dup)


def test_text_format_round_trip():
    sample = sample_hard_distribution(3, 2, 3)
    text = format_instance(sample.instance, sample.updates(), [sample.query])
    parsed = parse_instance(text)
    assert parsed.instance == sample.instance
    assert parsed.updates == sample.updates()
    assert parsed.queries == [sample.query]
    state = ParitySearchState(sample.instance)
    for u in sample.updates():
        state.apply(u)
    assert reference_answers(parsed) == [state.answer_query(sample.query)]
    assert text.splitlines()[0] == "param 2 3"


def test_text_format_interleaved_order():
    text = "param 1 2\nq 0 0\nu 1 0 0 0 1\nq 0 0\n"
    assert reference_answers(parse_instance(text)) == [0, 1]


@pytest.mark.parametrize(
    "text",
    [
        "u 1 0 0 0 1\n",
        "param 1 2\nu 1 0 0 0\n",
        "param 1 2\nu 1 0 9 0 1\n",
        "param 1 2\nq 0 2\n",
        "param 1 2\nz 1\n",
        "param 1 2\nq a b\n",
        "",
    ],
)
def test_text_format_errors(text):
    with pytest.raises(ValueError):
        parse_instance(text)


def test_epoch_updates_cover_graph():
    inst = MultiInstance(2, 2)
    ups = epoch_updates(inst, 2, [1] * 16)
    assert all(isinstance(u, Update) for u in ups)
    with pytest.raises(ValueError):
        epoch_updates(inst, 2, [1] * 3)
