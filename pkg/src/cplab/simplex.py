"""Exact two-phase dense simplex for small equality-form LPs.

Solves ``min c.x  s.t.  A x = b, x >= 0`` over ``Fraction``.  Bland's rule
(lowest eligible index enters and leaves) rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Number = int | Fraction


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: list[Fraction] | None
    objective: Fraction | None


def _pivot(tab: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tab[row][col]
    tab[row] = [v / piv for v in tab[row]]
    for r, line in enumerate(tab):
        if r != row and line[col] != 0:
            f = line[col]
            tab[r] = [a - f * b for a, b in zip(line, tab[row])]
    basis[row] = col


def _run(tab: list[list[Fraction]], basis: list[int], allowed: int) -> bool:
    """Minimize the objective in the last row; False if unbounded."""
    m = len(basis)
    obj = tab[m]
    while True:
        obj = tab[m]
        enter = next((j for j in range(allowed) if obj[j] < 0), None)
        if enter is None:
            return True
        best = None
        for r in range(m):
            a = tab[r][enter]
            if a > 0:
                ratio = tab[r][-1] / a
                key = (ratio, basis[r])
                if best is None or key < best[0]:
                    best = (key, r)
        if best is None:
            return False
        _pivot(tab, basis, best[1], enter)


def solve_lp(c: Sequence[Number], A: Sequence[Sequence[Number]], b: Sequence[Number]) -> LPResult:
    m, n = len(A), len(c)
    if any(len(row) != n for row in A) or len(b) != m:
        raise ValueError("shape mismatch")
    rows = []
    for row, rhs in zip(A, b):
        row = [Fraction(v) for v in row]
        rhs = Fraction(rhs)
        if rhs < 0:
            row, rhs = [-v for v in row], -rhs
        rows.append((row, rhs))
    # phase 1: artificials n..n+m-1, minimize their sum
    tab = []
    for r, (row, rhs) in enumerate(rows):
        art = [Fraction(int(r == i)) for i in range(m)]
        tab.append(row + art + [rhs])
    phase1 = [Fraction(0)] * (n + m + 1)
    for line in tab:
        for j in range(n):
            phase1[j] -= line[j]
        phase1[-1] -= line[-1]
    tab.append(phase1)
    basis = list(range(n, n + m))
    _run(tab, basis, n)
    if tab[m][-1] != 0:
        return LPResult("infeasible", None, None)
    # drive remaining artificials out of the basis or drop redundant rows
    for r in range(m - 1, -1, -1):
        if basis[r] >= n:
            col = next((j for j in range(n) if tab[r][j] != 0), None)
            if col is None:
                del tab[r]
                del basis[r]
            else:
                _pivot(tab, basis, r, col)
    m = len(basis)
    tab = [line[:n] + [line[-1]] for line in tab[:m]]
    cost = [Fraction(v) for v in c] + [Fraction(0)]
    for r, j in enumerate(basis):
        if cost[j] != 0:
            f = cost[j]
            cost = [a - f * v for a, v in zip(cost, tab[r])]
    tab.append(cost)
    if not _run(tab, basis, n):
        return LPResult("unbounded", None, None)
    x = [Fraction(0)] * n
    for r, j in enumerate(basis):
        x[j] = tab[r][-1]
    return LPResult("optimal", x, sum((Fraction(ci) * xi for ci, xi in zip(c, x)), Fraction(0)))
