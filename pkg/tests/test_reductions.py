import itertools
import random

import numpy as np
import pytest

from cplab.butterfly import EdgeId, MultiInstance, Rectangle, edge_rectangle, vector_index
from cplab.index_structures import Point
from cplab.parity_search import (
    ParitySearchState,
    QuerySpec,
    SetOnceError,
    Update,
    parse_instance,
    sample_hard_distribution,
)
from cplab.reductions import (
    DRIVERS,
    RangeParityDriver,
    RangeSelectionDriver,
    RectangleParityDriver,
    SelectionLayout,
    build_selection_layout,
    parity_via_range_parity,
    parity_via_range_selection,
    parity_via_rectangles,
    rectangle_corners,
    run_driver,
    selection_query_params,
    weight_update_to_rectangle,
)

FIG_EDGE = EdgeId(1, vector_index((1, 1, 0), 2), 0)


def test_weight_zero_inserts_nothing():
    inst = MultiInstance(3, 2)
    assert weight_update_to_rectangle(inst, 3, FIG_EDGE, 0) is None
    assert weight_update_to_rectangle(inst, 3, FIG_EDGE, 1) == Rectangle(2, 3, 4, 5)


def test_same_level_rectangles_are_disjoint():
    inst = MultiInstance(2, 3)
    for level in range(2):
        rects = [edge_rectangle(e, 2, 2, 3) for e in inst.graph(2).edges() if e.level == level]
        cells = [(s, t) for r in rects for s in range(r.s_lo, r.s_hi + 1) for t in range(r.t_lo, r.t_hi + 1)]
        assert len(cells) == len(set(cells)) == 81


def test_corner_example():
    corners = rectangle_corners(Rectangle(1, 2, 3, 4))
    assert corners == (Point(2, 6), Point(2, 9), Point(5, 6), Point(5, 9))
    probe = Point(4, 6)
    assert [p.x <= probe.x and p.y <= probe.y for p in corners] == [True, False, False, False]


def _dominated(corners, q):
    return sum(p.x <= q.x and p.y <= q.y for p in corners)


def test_corner_below_left_and_above_right():
    corners = rectangle_corners(Rectangle(1, 2, 3, 4))
    assert _dominated(corners, Point(0, 0)) == 0
    assert _dominated(corners, Point(6, 10)) == 4


def test_corner_parity_lemma_exhaustive():
    n = 6
    for x1, x2 in itertools.combinations_with_replacement(range(n), 2):
        for y1, y2 in itertools.combinations_with_replacement(range(n), 2):
            rect = Rectangle(x1, x2, y1, y2)
            corners = rectangle_corners(rect)
            for x in range(n):
                for y in range(n):
                    odd = _dominated(corners, Point(2 * x, 2 * y)) % 2 == 1
                    assert odd == rect.contains(x, y)


@pytest.mark.parametrize("ell,B", [(2, 2), (3, 2), (2, 3)])
def test_every_query_is_stabbed_by_delta_rectangles(ell, B):
    inst = MultiInstance(ell, B)
    rects = [edge_rectangle(e, i, ell, B) for i in range(1, ell + 1) for e in inst.graph(i).edges()]
    for s in range(inst.universe):
        for t in range(inst.universe):
            assert sum(r.contains(s, t) for r in rects) == inst.delta


def test_all_zero_weights_answer_zero():
    sample = sample_hard_distribution(0, 2, 2)
    zero = [Update(u.graph, u.edge, 0) for u in sample.updates()]
    queries = [QuerySpec(s, t) for s in range(4) for t in range(4)]
    inst = sample.instance
    for fn in (parity_via_rectangles, parity_via_range_parity, parity_via_range_selection):
        assert fn(inst, zero, queries) == [0] * 16


def test_all_zero_selection_returns_r():
    sample = sample_hard_distribution(0, 2, 3)
    trace = []
    drv = RangeSelectionDriver(sample.instance, trace=trace)
    for u in sample.updates():
        drv.update(Update(u.graph, u.edge, 0))
    for s in range(9):
        for t in range(9):
            drv.query(QuerySpec(s, t))
    assert all(row[-1] == row[-2] for row in trace)


def test_one_stabbed_rectangle_decrements_by_one():
    inst = MultiInstance(3, 2)
    trace = []
    drv = RangeSelectionDriver(inst, trace=trace)
    for i in range(3, 0, -1):
        for e in inst.graph(i).edges():
            drv.update(Update(i, e, int(i == 3 and e == FIG_EDGE)))
    for s in range(8):
        for t in range(8):
            inside = Rectangle(2, 3, 4, 5).contains(s, t)
            assert drv.query(QuerySpec(s, t)) == int(inside)
            *_, r, returned = trace[-1]
            assert returned == r - int(inside)


def test_single_weight_one_edge_hits_exactly_its_rectangle():
    inst = MultiInstance(2, 3)
    e = EdgeId(0, 2, 1)
    rect = edge_rectangle(e, 1, 2, 3)
    drivers = [RectangleParityDriver(inst), RangeParityDriver(inst)]
    for drv in drivers:
        drv.update(Update(1, e, 1))
        for s in range(9):
            for t in range(9):
                assert drv.query(QuerySpec(s, t)) == int(rect.contains(s, t))


@pytest.mark.parametrize("seed", range(12))
def test_chain_matches_reference(seed):
    rng = random.Random(seed)
    ell, B = rng.choice([(1, 2), (2, 2), (3, 2), (2, 3), (1, 4), (2, 4), (3, 3)])
    sample = sample_hard_distribution(seed, ell, B)
    inst = sample.instance
    U = inst.universe
    queries = [QuerySpec(rng.randrange(U), rng.randrange(U)) for _ in range(40)]
    state = ParitySearchState(inst)
    for u in sample.updates():
        state.apply(u)
    expect = [state.answer_query(q) for q in queries]
    assert parity_via_rectangles(inst, sample.updates(), queries) == expect
    assert parity_via_range_parity(inst, sample.updates(), queries) == expect
    assert parity_via_range_selection(inst, sample.updates(), queries) == expect


def test_layout_constants():
    inst = MultiInstance(3, 2)
    lay = build_selection_layout(inst)
    assert lay.delta == 6
    assert lay.num_points == 4 * inst.total_edges
    assert sorted(lay.rank_x.tolist()) == list(range(lay.num_points))
    assert sorted(lay.rank_y.tolist()) == list(range(lay.num_points))
    assert lay.b_len == lay.num_points * (lay.delta + 1)


def test_b_values_per_batch():
    inst = MultiInstance(2, 2)
    lay = build_selection_layout(inst)
    assert lay.delta == 3
    assert [lay.b_value(4 + i) for i in range(4)] == [6, 7, 8, 9]
    assert build_selection_layout(MultiInstance(1, 2)).b_value(1) == 2
    for h in range(5):
        r = h * lay.batch + lay.delta
        assert lay.b_value(r) == (lay.delta + 2) * h + lay.delta + 1


def test_rank_tie_break_follows_enumeration_order():
    lay = build_selection_layout(MultiInstance(2, 2))
    order = np.argsort(lay.rank_x)
    xs = lay.px[order]
    assert np.all(np.diff(xs) >= 0)
    for a, b in zip(order, order[1:]):
        if lay.px[a] == lay.px[b]:
            assert a < b


def test_params_with_no_dominated_points():
    inst = MultiInstance(1, 2)
    px = np.array([0, 20, 20, 20])
    py = np.array([20, 0, 20, 20])
    lay = SelectionLayout(inst, 0, px, py, np.arange(4), np.arange(4), {}, sorted(px.tolist()), sorted(py.tolist()))
    p = selection_query_params(QuerySpec(5, 5), lay)
    assert (p.j, p.h) == (0, 0)
    assert p.k == p.r + 1


def test_params_monotone_in_s():
    lay = build_selection_layout(MultiInstance(2, 3))
    for t in range(9):
        js = [selection_query_params(QuerySpec(s, t), lay).j for s in range(9)]
        assert js == sorted(js)


def test_selection_cost_per_update_is_order_delta():
    sample = sample_hard_distribution(2, 3, 3)
    drv = RangeSelectionDriver(sample.instance)
    for u in sample.updates():
        drv.update(u)
    delta = sample.instance.delta
    assert max(drv.index_ops) <= 8 * (delta + 1) + 4
    assert drv._b_written == drv.layout.b_len


def test_selection_requires_full_assignment():
    sample = sample_hard_distribution(1, 2, 2)
    drv = RangeSelectionDriver(sample.instance)
    for u in sample.updates()[:-1]:
        drv.update(u)
    with pytest.raises(RuntimeError):
        drv.query(QuerySpec(0, 0))


@pytest.mark.parametrize("cls", [RectangleParityDriver, RangeParityDriver, RangeSelectionDriver])
def test_drivers_enforce_set_once(cls):
    inst = MultiInstance(1, 2)
    drv = cls(inst)
    drv.update(Update(1, EdgeId(0, 0, 0), 1))
    with pytest.raises(SetOnceError):
        drv.update(Update(1, EdgeId(0, 0, 0), 0))


def test_run_driver_interleaved():
    parsed = parse_instance("param 1 2\nq 1 1\nu 1 0 1 1 1\nq 1 1\nq 0 0\n")
    for name in ("reference", "rectangle", "range_parity"):
        assert run_driver(DRIVERS[name](parsed.instance), parsed) == [0, 1, 0]
