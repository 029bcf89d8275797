"""Dynamic indexes used by the reductions, each with a brute-force twin.

``DominanceIndex`` counts inserted points dominated by a query point.
``SelectionIndex`` answers prefix selection: the position of the k-th
smallest entry among ``C[0..j]``.

Both count every internal read and write in ``probe_count`` and forward
them to an optional ``probe_hook(kind, key)``, so a cell-probe simulator
can meter them.  ``DominanceIndex`` also keeps its nodes in a pluggable
``store`` (any object with ``get(key, default)`` and ``__setitem__``).
"""

from __future__ import annotations

import bisect
from collections.abc import Callable, MutableMapping
from dataclasses import dataclass
from typing import Any

ProbeHook = Callable[[str, Any], None]


@dataclass(frozen=True, order=True)
class Point:
    x: int
    y: int


class DominanceIndex:
    """Two-level Fenwick tree over ``[0, universe]^2``.

    Nodes are created on first write, so memory is proportional to the
    number of insertions times ``log^2 universe``.
    """

    def __init__(
        self,
        universe: int,
        store: MutableMapping | None = None,
        probe_hook: ProbeHook | None = None,
    ):
        if universe < 0:
            raise ValueError("universe must be non-negative")
        self.universe = universe
        self._size = universe + 1
        self._store = {} if store is None else store
        self.probe_hook = probe_hook
        self.probe_count = 0
        self.inserted = 0

    def _check(self, p: Point) -> None:
        if not (0 <= p.x <= self.universe and 0 <= p.y <= self.universe):
            raise ValueError(f"point {p} outside universe [0, {self.universe}]^2")

    def _read(self, key: tuple[int, int]) -> int:
        self.probe_count += 1
        if self.probe_hook:
            self.probe_hook("r", key)
        return self._store.get(key, 0)

    def _write(self, key: tuple[int, int], value: int) -> None:
        self.probe_count += 1
        if self.probe_hook:
            self.probe_hook("w", key)
        self._store[key] = value

    def insert(self, p: Point) -> None:
        self._check(p)
        i = p.x + 1
        while i <= self._size:
            j = p.y + 1
            while j <= self._size:
                key = (i, j)
                self._write(key, self._read(key) + 1)
                j += j & -j
            i += i & -i
        self.inserted += 1

    def count(self, q: Point) -> int:
        """Number of inserted points ``p`` with ``p.x <= q.x`` and ``p.y <= q.y``."""
        self._check(q)
        total = 0
        i = q.x + 1
        while i > 0:
            j = q.y + 1
            while j > 0:
                total += self._read((i, j))
                j -= j & -j
            i -= i & -i
        return total

    def parity(self, q: Point) -> int:
        return self.count(q) & 1


class BruteDominance:
    def __init__(self, universe: int):
        self.universe = universe
        self.points: list[Point] = []

    def insert(self, p: Point) -> None:
        if not (0 <= p.x <= self.universe and 0 <= p.y <= self.universe):
            raise ValueError(f"point {p} outside universe")
        self.points.append(p)

    def count(self, q: Point) -> int:
        return sum(1 for p in self.points if p.x <= q.x and p.y <= q.y)

    def parity(self, q: Point) -> int:
        return self.count(q) & 1


class SelectionIndex:
    """Prefix selection over a mutable array of non-negative integers.

    A Fenwick tree over positions whose node ``i`` keeps the sorted values of
    the positions it covers.  ``count_at_most(j, v)`` visits ``O(log N)``
    nodes; ``query`` binary-searches the value over the global sorted list of
    entries.  Among entries tied for the k-th smallest value the smallest
    position is returned.
    """

    def __init__(self, length: int, probe_hook: ProbeHook | None = None):
        if length < 1:
            raise ValueError("length must be positive")
        self.length = length
        self.values = [0] * length
        self._nodes: list[list[int]] = [[]] + [[0] * (i & -i) for i in range(1, length + 1)]
        self._all = [0] * length
        self._positions: dict[int, list[int]] = {0: list(range(length))}
        self.probe_hook = probe_hook
        self.probe_count = 0

    def _probe(self, kind: str, key: Any) -> None:
        self.probe_count += 1
        if self.probe_hook:
            self.probe_hook(kind, key)

    def update(self, i: int, v: int) -> None:
        """Overwrite ``C[i]`` with ``v``."""
        if not 0 <= i < self.length:
            raise IndexError(f"position {i} out of range [0, {self.length})")
        if v < 0:
            raise ValueError("values must be non-negative")
        old = self.values[i]
        if old == v:
            return
        self.values[i] = v
        node = i + 1
        while node <= self.length:
            self._probe("w", node)
            arr = self._nodes[node]
            del arr[bisect.bisect_left(arr, old)]
            bisect.insort(arr, v)
            node += node & -node
        del self._all[bisect.bisect_left(self._all, old)]
        bisect.insort(self._all, v)
        olds = self._positions[old]
        del olds[bisect.bisect_left(olds, i)]
        if not olds:
            del self._positions[old]
        bisect.insort(self._positions.setdefault(v, []), i)

    def count_at_most(self, j: int, v: int) -> int:
        """Entries among ``C[0..j]`` with value ``<= v``."""
        total = 0
        node = j + 1
        while node > 0:
            self._probe("r", node)
            total += bisect.bisect_right(self._nodes[node], v)
            node -= node & -node
        return total

    def query(self, j: int, k: int) -> int:
        """Position of the ``k``-th smallest (1-based) entry of ``C[0..j]``."""
        if not 0 <= j < self.length:
            raise IndexError(f"prefix end {j} out of range")
        if not 1 <= k <= j + 1:
            raise ValueError(f"rank {k} out of range [1, {j + 1}]")
        lo, hi = 0, self.length - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.count_at_most(j, self._all[mid]) >= k:
                hi = mid
            else:
                lo = mid + 1
        value = self._all[lo]
        self._probe("r", ("pos", value))
        return self._positions[value][0]

    def query_parity(self, j: int, k: int) -> int:
        """Whether the selected entry sits at an odd position."""
        return self.query(j, k) & 1


class BruteSelection:
    def __init__(self, length: int):
        self.values = [0] * length

    def update(self, i: int, v: int) -> None:
        if not 0 <= i < len(self.values):
            raise IndexError(i)
        self.values[i] = v

    def query(self, j: int, k: int) -> int:
        if not 1 <= k <= j + 1:
            raise ValueError(k)
        order = sorted(range(j + 1), key=lambda p: self.values[p])
        target = self.values[order[k - 1]]
        return min(p for p in range(j + 1) if self.values[p] == target)
