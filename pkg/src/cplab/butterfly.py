"""Butterfly graph combinatorics.

Nodes of a degree-``B``, depth-``d`` Butterfly are indexed by integers in
``[0, B**d)`` and viewed as base-``B`` digit vectors with the least
significant digit at coordinate 0.  An edge leaving level ``j`` replaces
digit ``j`` and leaves all other digits alone, so every source/sink pair
is joined by exactly one path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

ENUMERATION_GUARD = 1 << 24


def _check_range(value: int, d: int, B: int, what: str) -> None:
    if not 0 <= value < B**d:
        raise ValueError(f"{what} {value} out of range [0, {B**d}) for B={B}, d={d}")


def node_vector(index: int, d: int, B: int) -> tuple[int, ...]:
    """Base-``B`` digits of ``index``, least significant first, padded to ``d``."""
    _check_range(index, d, B, "index")
    digits = []
    for _ in range(d):
        index, r = divmod(index, B)
        digits.append(r)
    return tuple(digits)


def vector_index(vec: tuple[int, ...] | list[int], B: int) -> int:
    out = 0
    for digit in reversed(vec):
        out = out * B + digit
    return out


def digit_reverse(x: int, d: int, B: int) -> int:
    """Reverse the ``d`` base-``B`` digits of ``x`` (leading zeros kept)."""
    _check_range(x, d, B, "x")
    out = 0
    for _ in range(d):
        x, r = divmod(x, B)
        out = out * B + r
    return out


@dataclass(frozen=True)
class ButterflyGraph:
    degree: int
    depth: int

    def __post_init__(self) -> None:
        if self.degree < 2:
            raise ValueError("Butterfly degree must be >= 2")
        if self.depth < 1:
            raise ValueError("Butterfly depth must be >= 1")

    @property
    def width(self) -> int:
        """Nodes per level."""
        return self.degree**self.depth

    @property
    def num_edges(self) -> int:
        return self.depth * self.degree ** (self.depth + 1)

    def edges(self) -> Iterator[EdgeId]:
        """All edges in canonical order: level, then from_index, then to_digit."""
        for level in range(self.depth):
            for frm in range(self.width):
                for to_digit in range(self.degree):
                    yield EdgeId(level, frm, to_digit)

    def edge_position(self, edge: EdgeId) -> int:
        """Rank of ``edge`` in :meth:`edges` order."""
        self.validate_edge(edge)
        return (edge.level * self.width + edge.from_index) * self.degree + edge.to_digit

    def validate_edge(self, edge: EdgeId) -> None:
        if not 0 <= edge.level < self.depth:
            raise ValueError(f"edge level {edge.level} out of range for depth {self.depth}")
        if not 0 <= edge.from_index < self.width:
            raise ValueError(f"edge source {edge.from_index} out of range")
        if not 0 <= edge.to_digit < self.degree:
            raise ValueError(f"edge digit {edge.to_digit} out of range")

    def edge_target(self, edge: EdgeId) -> int:
        """Index of the level ``level+1`` node the edge enters."""
        self.validate_edge(edge)
        B, j = self.degree, edge.level
        old = (edge.from_index // B**j) % B
        return edge.from_index + (edge.to_digit - old) * B**j

    def out_edges(self, level: int, index: int) -> list[EdgeId]:
        return [EdgeId(level, index, w) for w in range(self.degree)]

    def in_edges(self, level: int, index: int) -> list[EdgeId]:
        """Edges entering node ``index`` on ``level`` (``level`` >= 1)."""
        if not 1 <= level <= self.depth:
            raise ValueError("sources have no incoming edges")
        j, B = level - 1, self.degree
        digit = (index // B**j) % B
        base = index - digit * B**j
        return [EdgeId(j, base + w * B**j, digit) for w in range(B)]


@dataclass(frozen=True, order=True)
class EdgeId:
    """Edge leaving ``from_index`` on ``level`` and setting digit ``level`` to ``to_digit``."""

    level: int
    from_index: int
    to_digit: int


@dataclass(frozen=True)
class MultiInstance:
    """Graphs ``G_ell .. G_1`` of common degree with depth ``d_i = i``."""

    ell: int
    degree: int

    def __post_init__(self) -> None:
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if self.degree < 2:
            raise ValueError("degree must be >= 2")

    @property
    def depths(self) -> list[int]:
        return list(range(self.ell, 0, -1))

    def depth(self, i: int) -> int:
        self._check_graph(i)
        return i

    def graph(self, i: int) -> ButterflyGraph:
        return ButterflyGraph(self.degree, self.depth(i))

    def edge_count(self, i: int) -> int:
        d = self.depth(i)
        return d * self.degree ** (d + 1)

    @property
    def total_edges(self) -> int:
        return sum(self.edge_count(i) for i in range(1, self.ell + 1))

    @property
    def universe(self) -> int:
        """Query coordinates range over ``[0, B**d_ell)``."""
        return self.degree**self.ell

    @property
    def delta(self) -> int:
        """Sum of all depths: the number of rectangles stabbed by any query."""
        return self.ell * (self.ell + 1) // 2

    def _check_graph(self, i: int) -> None:
        if not 1 <= i <= self.ell:
            raise ValueError(f"graph index {i} out of range [1, {self.ell}]")

    def source_sink(self, i: int, s: int, t: int) -> tuple[int, int]:
        """Per-graph source and (digit-reversed) sink for query ``(s, t)``."""
        d = self.depth(i)
        if not (0 <= s < self.universe and 0 <= t < self.universe):
            raise ValueError(f"query ({s}, {t}) out of range [0, {self.universe})")
        shift = self.degree ** (self.ell - d)
        return s // shift, digit_reverse(t // shift, d, self.degree)


@dataclass(frozen=True)
class Rectangle:
    """Closed integer rectangle ``[s_lo, s_hi] x [t_lo, t_hi]``."""

    s_lo: int
    s_hi: int
    t_lo: int
    t_hi: int

    def __post_init__(self) -> None:
        if self.s_lo > self.s_hi or self.t_lo > self.t_hi:
            raise ValueError(f"empty rectangle {self}")

    def contains(self, s: int, t: int) -> bool:
        return self.s_lo <= s <= self.s_hi and self.t_lo <= t <= self.t_hi

    @property
    def area(self) -> int:
        return (self.s_hi - self.s_lo + 1) * (self.t_hi - self.t_lo + 1)


def path_nodes(source_index: int, sink_index: int, graph: ButterflyGraph) -> list[int]:
    """Node indices on levels ``0..d`` of the unique path."""
    B, d = graph.degree, graph.depth
    src = list(node_vector(source_index, d, B))
    dst = node_vector(sink_index, d, B)
    nodes = [source_index]
    for j in range(d):
        src[j] = dst[j]
        nodes.append(vector_index(src, B))
    return nodes


def path_edges(source_index: int, sink_index: int, graph: ButterflyGraph) -> list[EdgeId]:
    """The ``d`` edges of the unique path from a source to a sink-layer index."""
    B, d = graph.degree, graph.depth
    src = list(node_vector(source_index, d, B))
    dst = node_vector(sink_index, d, B)
    edges = []
    for j in range(d):
        edges.append(EdgeId(j, vector_index(src, B), dst[j]))
        src[j] = dst[j]
    return edges


def edge_rectangle(edge: EdgeId, d_i: int, d_ell: int, B: int) -> Rectangle:
    """Queries ``(s, t)`` whose graph-``i`` path uses ``edge``.

    Sources must agree with the edge's tail on digits ``j..d_i-1``; sinks must
    agree with its head on digits ``0..j``.  After the shift by
    ``B**(d_ell-d_i)`` and digit reversal of ``t`` both sets are intervals.
    """
    if d_i > d_ell:
        raise ValueError(f"d_i={d_i} exceeds d_ell={d_ell}")
    ButterflyGraph(B, d_i).validate_edge(edge)
    j = edge.level
    w = node_vector(edge.from_index, d_i, B)
    shift = d_ell - d_i

    s_lo = sum(w[k] * B ** (k + shift) for k in range(j, d_i))
    s_hi = s_lo + B ** (j + shift) - 1

    t_lo = edge.to_digit * B ** (d_ell - j - 1) + sum(w[k] * B ** (d_ell - 1 - k) for k in range(j))
    t_hi = t_lo + B ** (d_ell - j - 1) - 1
    return Rectangle(s_lo, s_hi, t_lo, t_hi)


def stabbing_pairs_oracle(edge: EdgeId, d_i: int, d_ell: int, B: int) -> set[tuple[int, int]]:
    """Every ``(s, t)`` whose routed path in a depth-``d_i`` graph uses ``edge``, by enumeration."""
    if B ** (2 * d_ell) > ENUMERATION_GUARD:
        raise ValueError(f"enumeration of {B ** (2 * d_ell)} query pairs exceeds guard {ENUMERATION_GUARD}")
    if d_i > d_ell:
        raise ValueError(f"d_i={d_i} exceeds d_ell={d_ell}")
    graph = ButterflyGraph(B, d_i)
    graph.validate_edge(edge)
    shift = B ** (d_ell - d_i)
    hits = set()
    for s in range(B**d_ell):
        for t in range(B**d_ell):
            sink = digit_reverse(t // shift, d_i, B)
            if edge in path_edges(s // shift, sink, graph):
                hits.add((s, t))
    return hits
