"""Reductions from parity searching to 2D range problems.

Chain: Butterfly edge -> query rectangle -> four corner points.  Drivers
replay a parity-searching update/query stream against

* brute-force rectangle stabbing parity,
* a dominance-parity index over doubled corner points, and
* a prefix range-selection index, reading only the parity of the returned
  position.

Every driver must agree bitwise with the reference solver.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, TextIO

import numpy as np

from cplab.butterfly import EdgeId, MultiInstance, Rectangle, edge_rectangle
from cplab.index_structures import DominanceIndex, Point, SelectionIndex
from cplab.parity_search import InstanceFile, ParitySearchState, QuerySpec, SetOnceError, Update


def weight_update_to_rectangle(instance: MultiInstance, i: int, edge: EdgeId, weight: int) -> Rectangle | None:
    """The rectangle to insert for an update; ``None`` for weight 0."""
    rect = edge_rectangle(edge, instance.depth(i), instance.ell, instance.degree)
    return rect if weight else None


def rectangle_corners(rect: Rectangle) -> tuple[Point, Point, Point, Point]:
    """Corners doubled so a query ``(2x, 2y)`` never lies on a rectangle side."""
    x1, x2, y1, y2 = rect.s_lo, rect.s_hi, rect.t_lo, rect.t_hi
    return (
        Point(2 * x1, 2 * y1),
        Point(2 * x1, 2 * y2 + 1),
        Point(2 * x2 + 1, 2 * y1),
        Point(2 * x2 + 1, 2 * y2 + 1),
    )


def query_point(q: QuerySpec) -> Point:
    return Point(2 * q.s, 2 * q.t)


class Driver(Protocol):
    def update(self, u: Update) -> None: ...

    def query(self, q: QuerySpec) -> int: ...


class ReferenceDriver:
    name = "reference"

    def __init__(self, instance: MultiInstance):
        self.state = ParitySearchState(instance)

    def update(self, u: Update) -> None:
        self.state.apply(u)

    def query(self, q: QuerySpec) -> int:
        return self.state.answer_query(q)


class _SetOnce:
    def __init__(self, instance: MultiInstance):
        self.instance = instance
        self._seen: set[tuple[int, EdgeId]] = set()

    def claim(self, u: Update) -> None:
        self.instance.graph(u.graph).validate_edge(u.edge)
        key = (u.graph, u.edge)
        if key in self._seen:
            raise SetOnceError(f"edge {u.edge} of graph {u.graph} already set")
        self._seen.add(key)

    @property
    def assigned(self) -> int:
        return len(self._seen)


class RectangleParityDriver:
    """Inserted rectangles kept in flat arrays; queries count stabs."""

    name = "rectangle"

    def __init__(self, instance: MultiInstance):
        self.instance = instance
        self._once = _SetOnce(instance)
        self._bounds: list[tuple[int, int, int, int]] = []
        self._arr = np.empty((0, 4), dtype=np.int64)

    def update(self, u: Update) -> None:
        self._once.claim(u)
        rect = weight_update_to_rectangle(self.instance, u.graph, u.edge, u.weight)
        if rect is not None:
            self._bounds.append((rect.s_lo, rect.s_hi, rect.t_lo, rect.t_hi))

    def query(self, q: QuerySpec) -> int:
        if len(self._arr) != len(self._bounds):
            self._arr = np.array(self._bounds, dtype=np.int64).reshape(-1, 4)
        a = self._arr
        hits = (a[:, 0] <= q.s) & (q.s <= a[:, 1]) & (a[:, 2] <= q.t) & (q.t <= a[:, 3])
        return int(np.count_nonzero(hits)) & 1


class RangeParityDriver:
    """Four corner points per weight-1 edge in a dominance index."""

    name = "range_parity"

    def __init__(self, instance: MultiInstance):
        self.instance = instance
        self._once = _SetOnce(instance)
        self.index = DominanceIndex(2 * instance.universe + 1)

    def update(self, u: Update) -> None:
        self._once.claim(u)
        rect = weight_update_to_rectangle(self.instance, u.graph, u.edge, u.weight)
        if rect is not None:
            for p in rectangle_corners(rect):
                self.index.insert(p)

    def query(self, q: QuerySpec) -> int:
        return self.index.parity(query_point(q))


@dataclass
class SelectionLayout:
    """Weight-independent geometry of the range-selection reduction.

    Points are enumerated by graph, edge (canonical order) and corner; that
    enumeration order is the tie-break for both rank maps.
    """

    instance: MultiInstance
    delta: int
    px: np.ndarray
    py: np.ndarray
    rank_x: np.ndarray
    rank_y: np.ndarray
    owner: dict[tuple[int, EdgeId], int]
    sorted_x: list[int] = field(repr=False)
    sorted_y: list[int] = field(repr=False)

    @property
    def num_points(self) -> int:
        return len(self.px)

    @property
    def batch(self) -> int:
        return self.delta + 1

    @property
    def scale(self) -> int:
        return self.delta + 2

    @property
    def b_len(self) -> int:
        # one batch per possible h in [0, |P|)
        return self.num_points * self.batch

    @property
    def discard_value(self) -> int:
        return self.num_points * self.scale

    def b_value(self, index: int) -> int:
        j, i = divmod(index, self.batch)
        return self.scale * j + i + 1

    def corners_of(self, i: int, edge: EdgeId) -> range:
        """Point ids of the four corners, in corner order ``p1..p4``."""
        first = self.owner[(i, edge)]
        return range(first, first + 4)


def build_selection_layout(instance: MultiInstance) -> SelectionLayout:
    xs, ys = [], []
    owner = {}
    for i in range(1, instance.ell + 1):
        for e in instance.graph(i).edges():
            owner[(i, e)] = len(xs)
            for p in rectangle_corners(edge_rectangle(e, i, instance.ell, instance.degree)):
                xs.append(p.x)
                ys.append(p.y)
    px = np.array(xs, dtype=np.int64)
    py = np.array(ys, dtype=np.int64)
    rank_x = np.empty(len(px), dtype=np.int64)
    rank_x[np.argsort(px, kind="stable")] = np.arange(len(px))
    rank_y = np.empty(len(py), dtype=np.int64)
    rank_y[np.argsort(py, kind="stable")] = np.arange(len(py))
    return SelectionLayout(instance, instance.delta, px, py, rank_x, rank_y, owner, sorted(xs), sorted(ys))


@dataclass(frozen=True)
class SelectionParams:
    j: int
    h: int
    k: int
    r: int


def selection_query_params(q: QuerySpec, layout: SelectionLayout) -> SelectionParams:
    """Prefix end ``j``, y-threshold ``h``, rank ``k`` and expected index ``r``.

    ``k`` is the rank of ``B[r]`` among ``B`` and ``A[0..j]`` once the
    ``delta`` rectangles containing the query are ignored: each other
    rectangle dominates 0, 2 or 4 of its corners and exactly half of those
    entries hold a value at most ``B[r]``, whatever its weight.
    """
    X, Y = 2 * q.s, 2 * q.t
    j = bisect.bisect_right(layout.sorted_x, X) - 1
    h = bisect.bisect_right(layout.sorted_y, Y) - 1
    r = h * layout.batch + layout.delta
    dominated = int(np.count_nonzero((layout.px <= X) & (layout.py <= Y)))
    stabbed = layout.delta
    k = r + 1 + (dominated - stabbed) // 2
    return SelectionParams(j, h, k, r)


class RangeSelectionDriver:
    """Parity searching answered by one prefix-selection query.

    The array is ``C = B + A``.  ``B`` is written during epoch ``ell``,
    spread evenly over its updates.  Queries require every edge assigned.
    """

    name = "range_selection"

    def __init__(self, instance: MultiInstance, layout: SelectionLayout | None = None, trace: list | None = None):
        self.instance = instance
        self.layout = layout or build_selection_layout(instance)
        self.index = SelectionIndex(self.layout.b_len + self.layout.num_points)
        self._once = _SetOnce(instance)
        self._b_written = 0
        self._big_updates = 0
        self.index_ops: list[int] = []
        self._ops = 0
        self.trace = trace

    def _write(self, pos: int, value: int) -> None:
        self.index.update(pos, value)
        self._ops += 1

    def update(self, u: Update) -> None:
        self._once.claim(u)
        self._ops = 0
        lay = self.layout
        if u.graph == self.instance.ell:
            self._big_updates += 1
            n_big = self.instance.edge_count(self.instance.ell)
            target = math.ceil(self._big_updates * lay.b_len / n_big)
            while self._b_written < target:
                self._write(self._b_written, lay.b_value(self._b_written))
                self._b_written += 1
        base = lay.b_len
        p1, p2, p3, p4 = lay.corners_of(u.graph, u.edge)
        keep = (p1, p4) if u.weight else (p2, p3)
        for p in (p1, p2, p3, p4):
            value = int(lay.rank_y[p]) * lay.scale if p in keep else lay.discard_value
            self._write(base + int(lay.rank_x[p]), value)
        self.index_ops.append(self._ops)

    def query(self, q: QuerySpec) -> int:
        if self._once.assigned != self.instance.total_edges:
            raise RuntimeError(
                f"range-selection driver needs every edge assigned ({self._once.assigned}/{self.instance.total_edges})"
            )
        params = selection_query_params(q, self.layout)
        if params.j < 0 or params.h < 0:
            raise RuntimeError(f"query {q} precedes every corner point")
        returned = self.index.query(params.j + self.layout.b_len, params.k)
        if self.trace is not None:
            self.trace.append((q.s, q.t, params.j, params.h, params.k, params.r, returned))
        return (returned & 1) ^ (params.r & 1)


DRIVERS = {
    "reference": ReferenceDriver,
    "rectangle": RectangleParityDriver,
    "range_parity": RangeParityDriver,
    "range_selection": RangeSelectionDriver,
}


def run_driver(driver: Driver, parsed: InstanceFile) -> list[int]:
    """Replay a parsed instance in file order and collect query answers."""
    out = []
    for kind, pos in parsed.order:
        if kind == "u":
            driver.update(parsed.updates[pos])
        else:
            out.append(driver.query(parsed.queries[pos]))
    return out


def _run_streams(driver: Driver, updates: Iterable[Update], queries: Iterable[QuerySpec]) -> list[int]:
    for u in updates:
        driver.update(u)
    return [driver.query(q) for q in queries]


def parity_via_rectangles(instance: MultiInstance, updates: Iterable[Update], queries: Iterable[QuerySpec]) -> list[int]:
    return _run_streams(RectangleParityDriver(instance), updates, queries)


def parity_via_range_parity(instance: MultiInstance, updates: Iterable[Update], queries: Iterable[QuerySpec]) -> list[int]:
    return _run_streams(RangeParityDriver(instance), updates, queries)


def parity_via_range_selection(instance: MultiInstance, updates: Iterable[Update], queries: Iterable[QuerySpec]) -> list[int]:
    return _run_streams(RangeSelectionDriver(instance), updates, queries)


def write_selection_trace(fh: TextIO, rows: Iterable[tuple]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s", "t", "j", "h", "k", "r", "returned"])
    w.writerows(rows)
