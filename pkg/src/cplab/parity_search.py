"""Dynamic parity searching in Butterfly graphs.

An instance is ``ell`` Butterflies ``G_ell .. G_1`` (depth ``d_i = i``).
Updates assign a bit to an edge of one graph, at most once per edge; a
query ``(s, t)`` asks for the XOR of the weights on the per-graph paths it
decomposes into.  This module holds the reference solver, the hard input
distribution, meta-query construction and the instance text format.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

from cplab.butterfly import (
    ButterflyGraph,
    EdgeId,
    MultiInstance,
    digit_reverse,
    node_vector,
    path_edges,
    path_nodes,
    vector_index,
)


class SetOnceError(ValueError):
    """An edge weight was assigned a second time."""


@dataclass(frozen=True)
class Update:
    graph: int
    edge: EdgeId
    weight: int


@dataclass(frozen=True)
class QuerySpec:
    s: int
    t: int


class ParitySearchState:
    """Edge weights of every graph, with set-once bookkeeping.

    Unset edges read as weight 0.
    """

    def __init__(self, instance: MultiInstance):
        self.instance = instance
        self._weights: dict[int, dict[EdgeId, int]] = {i: {} for i in range(1, instance.ell + 1)}

    def apply_update(self, i: int, edge: EdgeId, weight: int) -> None:
        self.instance.graph(i).validate_edge(edge)
        if weight not in (0, 1):
            raise ValueError(f"weight must be 0 or 1, got {weight}")
        table = self._weights[i]
        if edge in table:
            raise SetOnceError(f"edge {edge} of graph {i} already set")
        table[edge] = weight

    def apply(self, update: Update) -> None:
        self.apply_update(update.graph, update.edge, update.weight)

    def weight(self, i: int, edge: EdgeId) -> int:
        return self._weights[i].get(edge, 0)

    def snapshot(self) -> dict[int, dict[EdgeId, int]]:
        return {i: dict(t) for i, t in self._weights.items()}

    def is_set(self, i: int, edge: EdgeId) -> bool:
        return edge in self._weights[i]

    def set_count(self, i: int | None = None) -> int:
        if i is None:
            return sum(len(t) for t in self._weights.values())
        return len(self._weights[i])

    @property
    def fully_assigned(self) -> bool:
        return self.set_count() == self.instance.total_edges

    def query_paths(self, q: QuerySpec) -> dict[int, list[EdgeId]]:
        paths = {}
        for i in range(1, self.instance.ell + 1):
            src, sink = self.instance.source_sink(i, q.s, q.t)
            paths[i] = path_edges(src, sink, self.instance.graph(i))
        return paths

    def answer_query(self, q: QuerySpec) -> int:
        bit = 0
        for i, edges in self.query_paths(q).items():
            table = self._weights[i]
            for e in edges:
                bit ^= table.get(e, 0)
        return bit

    def answer_meta_query(self, i: int, queries: Sequence[QuerySpec]) -> int:
        check_meta_query(self.instance, i, queries)
        bit = 0
        for q in queries:
            bit ^= self.answer_query(q)
        return bit


def epoch_updates(instance: MultiInstance, i: int, bits: Sequence[int]) -> list[Update]:
    """Updates of epoch ``i``: every edge of ``G_i`` in canonical order."""
    graph = instance.graph(i)
    if len(bits) != graph.num_edges:
        raise ValueError(f"epoch {i} needs {graph.num_edges} bits, got {len(bits)}")
    return [Update(i, e, int(b)) for e, b in zip(graph.edges(), bits)]


@dataclass
class HardSample:
    instance: MultiInstance
    epochs: dict[int, list[Update]] = field(default_factory=dict)
    query: QuerySpec | None = None

    def updates(self) -> list[Update]:
        """All updates in time order (epoch ``ell`` first)."""
        return [u for i in range(self.instance.ell, 0, -1) for u in self.epochs[i]]


def sample_hard_distribution(seed: int, ell: int, B: int) -> HardSample:
    """Uniform weights on every edge of every graph, then a uniform query."""
    instance = MultiInstance(ell, B)
    rng = random.Random(seed)
    sample = HardSample(instance)
    for i in range(ell, 0, -1):
        bits = [rng.getrandbits(1) for _ in range(instance.edge_count(i))]
        sample.epochs[i] = epoch_updates(instance, i, bits)
    U = instance.universe
    sample.query = QuerySpec(rng.randrange(U), rng.randrange(U))
    return sample


# -- meta queries --------------------------------------------------------------

ChunkKey = tuple[int, tuple[int, ...]]


def chunk_key(level: int, vec: Sequence[int]) -> ChunkKey:
    """Level plus the digits other than ``level``, low to high."""
    return level, tuple(vec[:level]) + tuple(vec[level + 1 :])


@dataclass
class ChunkPermutations:
    """One permutation of ``[0, B)`` per chunk of one graph."""

    graph: ButterflyGraph
    perms: dict[ChunkKey, tuple[int, ...]]

    def __post_init__(self) -> None:
        B = self.graph.degree
        for key, perm in self.perms.items():
            if sorted(perm) != list(range(B)):
                raise ValueError(f"chunk {key} carries a non-permutation {perm}")

    @classmethod
    def identity(cls, graph: ButterflyGraph) -> ChunkPermutations:
        ident = tuple(range(graph.degree))
        return cls(graph, {k: ident for k in chunk_keys(graph)})

    @classmethod
    def random(cls, graph: ButterflyGraph, rng: random.Random) -> ChunkPermutations:
        perms = {}
        for k in chunk_keys(graph):
            p = list(range(graph.degree))
            rng.shuffle(p)
            perms[k] = tuple(p)
        return cls(graph, perms)

    def __getitem__(self, key: ChunkKey) -> tuple[int, ...]:
        try:
            return self.perms[key]
        except KeyError:
            raise KeyError(f"missing permutation for chunk {key}") from None


def chunk_keys(graph: ButterflyGraph) -> Iterator[ChunkKey]:
    B, d = graph.degree, graph.depth
    for level in range(d):
        for rest in itertools.product(range(B), repeat=d - 1):
            yield level, rest


def trace_meta_path(source: int, graph: ButterflyGraph, perms: ChunkPermutations) -> list[int]:
    """Node indices on levels ``0..d`` for the permutation-traced path from ``source``."""
    B, d = graph.degree, graph.depth
    vec = list(node_vector(source, d, B))
    nodes = [source]
    for j in range(d):
        vec[j] = perms[chunk_key(j, vec)][vec[j]]
        nodes.append(vector_index(vec, B))
    return nodes


def build_meta_paths(graph: ButterflyGraph, perms: ChunkPermutations) -> list[tuple[int, int]]:
    """``(source, sink)`` for every source, sinks in sink-layer indexing."""
    return [(s, trace_meta_path(s, graph, perms)[-1]) for s in range(graph.width)]


def lift_meta_query(
    instance: MultiInstance,
    i: int,
    pairs: Sequence[tuple[int, int]],
    rng: random.Random | None = None,
) -> list[QuerySpec]:
    """Turn graph-``i`` source/sink pairs into full-range queries.

    The low ``d_ell - d_i`` digits of ``s`` and ``t`` are free; they are
    drawn from ``rng`` when given and zero otherwise.
    """
    d = instance.depth(i)
    B = instance.degree
    shift = B ** (instance.ell - d)
    out = []
    for src, sink in pairs:
        rs = rng.randrange(shift) if rng else 0
        rt = rng.randrange(shift) if rng else 0
        out.append(QuerySpec(src * shift + rs, digit_reverse(sink, d, B) * shift + rt))
    return out


def check_meta_query(instance: MultiInstance, i: int, queries: Sequence[QuerySpec]) -> None:
    """Raise unless ``queries`` are one per source of ``G_i`` with node-disjoint paths."""
    graph = instance.graph(i)
    if len(queries) != graph.width:
        raise ValueError(f"meta query for graph {i} needs {graph.width} queries, got {len(queries)}")
    seen: list[set[int]] = [set() for _ in range(graph.depth + 1)]
    for j, q in enumerate(queries):
        src, sink = instance.source_sink(i, q.s, q.t)
        if src != j:
            raise ValueError(f"query {j} routes from source {src}, expected {j}")
        for level, v in enumerate(path_nodes(src, sink, graph)):
            if v in seen[level]:
                raise ValueError(f"meta query paths collide at level {level}, node {v}")
            seen[level].add(v)


# -- text format -------------------------------------------------------------


@dataclass
class InstanceFile:
    instance: MultiInstance
    updates: list[Update]
    queries: list[QuerySpec]
    # (kind, position) in file order, kind in {"u", "q"}
    order: list[tuple[str, int]] = field(default_factory=list)


def format_instance(instance: MultiInstance, updates: Iterable[Update], queries: Iterable[QuerySpec]) -> str:
    lines = [f"param {instance.ell} {instance.degree}"]
    for u in updates:
        e = u.edge
        lines.append(f"u {u.graph} {e.level} {e.from_index} {e.to_digit} {u.weight}")
    for q in queries:
        lines.append(f"q {q.s} {q.t}")
    return "\n".join(lines) + "\n"


def write_instance(fh: TextIO, instance: MultiInstance, updates: Iterable[Update], queries: Iterable[QuerySpec]) -> None:
    fh.write(format_instance(instance, updates, queries))


def parse_instance(text: str) -> InstanceFile:
    instance = None
    updates: list[Update] = []
    queries: list[QuerySpec] = []
    order: list[tuple[str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag, args = parts[0], parts[1:]
        try:
            nums = [int(a) for a in args]
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer field in {raw!r}") from None
        if tag == "param":
            if len(nums) != 2 or instance is not None:
                raise ValueError(f"line {lineno}: bad or repeated param header")
            instance = MultiInstance(*nums)
            continue
        if instance is None:
            raise ValueError(f"line {lineno}: record before param header")
        if tag == "u":
            if len(nums) != 5:
                raise ValueError(f"line {lineno}: update needs 5 fields")
            i, level, frm, digit, weight = nums
            edge = EdgeId(level, frm, digit)
            instance.graph(i).validate_edge(edge)
            if weight not in (0, 1):
                raise ValueError(f"line {lineno}: weight must be 0/1")
            order.append(("u", len(updates)))
            updates.append(Update(i, edge, weight))
        elif tag == "q":
            if len(nums) != 2:
                raise ValueError(f"line {lineno}: query needs 2 fields")
            if not all(0 <= x < instance.universe for x in nums):
                raise ValueError(f"line {lineno}: query out of range")
            order.append(("q", len(queries)))
            queries.append(QuerySpec(*nums))
        else:
            raise ValueError(f"line {lineno}: unknown record {tag!r}")
    if instance is None:
        raise ValueError("missing param header")
    return InstanceFile(instance, updates, queries, order)


def reference_answers(parsed: InstanceFile) -> list[int]:
    """Replay a parsed file in order with the reference solver."""
    state = ParitySearchState(parsed.instance)
    out = []
    for kind, pos in parsed.order:
        if kind == "u":
            state.apply(parsed.updates[pos])
        else:
            out.append(state.answer_query(parsed.queries[pos]))
    return out
