"""Peak-to-average tools for signed tables.

* ``chebyshev_symmetric`` builds a symmetric polynomial that is large at
  ``0^k`` and bounded by 1 on every other Hamming weight.
* ``find_peak_subset`` uses it to locate a small coordinate set ``Y`` whose
  conditional sums carry certified mass.
* ``tight_counterexample`` solves a small LP for tables with no mass below a
  degree threshold.

Tables index ``z`` in ``Σ^k`` as ``Σ_i z_i |Σ|^i``.  For boolean tables bit
``i`` is coordinate ``i``; on ``{-1,1}^k`` a set bit means ``+1``.  Exact
arithmetic is used throughout: table values are integers over a common
denominator, or Python objects such as ``Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from cplab.simplex import solve_lp

BOOLEAN_ARITY_GUARD = 20


def chebyshev_value(D: int, a: Fraction) -> Fraction:
    """T_D(a) by the three-term recurrence."""
    prev, cur = Fraction(1), Fraction(a)
    if D == 0:
        return prev
    for _ in range(D - 1):
        prev, cur = cur, 2 * a * cur - prev
    return cur


def forward_differences(values: list[Fraction], upto: int) -> list[Fraction]:
    """``b_r = Σ_j (-1)^(r-j) C(r,j) values[j]`` for ``r = 0..upto``."""
    return [
        sum((Fraction((-1) ** (r - j) * math.comb(r, j)) * values[j] for j in range(r + 1)), Fraction(0))
        for r in range(upto + 1)
    ]


@dataclass(frozen=True)
class SymmetricPoly:
    """``q(t) = Σ_r b_r C(t, r)``; as a multilinear polynomial its monomial
    ``Π_{i∈Y} x_i`` has coefficient ``b_|Y|``."""

    k: int
    degree: int
    b: tuple[Fraction, ...]

    def value(self, t: int) -> Fraction:
        return sum((br * math.comb(t, r) for r, br in enumerate(self.b)), Fraction(0))

    def monomial(self, Y: Iterable[int]) -> Fraction:
        size = len(tuple(Y))
        return self.b[size] if size < len(self.b) else Fraction(0)

    @property
    def coefficient_sum(self) -> Fraction:
        return sum((math.comb(self.k, r) * abs(br) for r, br in enumerate(self.b)), Fraction(0))

    @property
    def effective_degree(self) -> int:
        return max((r for r, br in enumerate(self.b) if br != 0), default=0)


@dataclass
class ChebyshevReport:
    poly: SymmetricPoly
    M: Fraction
    values: list[Fraction]
    q0: Fraction
    max_tail: Fraction
    degree_bound: int

    @property
    def ok(self) -> bool:
        return self.q0 >= self.M and self.max_tail <= 1 and self.poly.degree <= self.degree_bound


def chebyshev_symmetric(k: int, M: Fraction | int | float) -> ChebyshevReport:
    """Symmetric ``q`` with ``q(0) >= M`` and ``|q(t)| <= 1`` for ``t = 1..k``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    M = Fraction(M)
    if M < 2:
        raise ValueError(f"M must be at least 2, got {M}")
    if M > Fraction(2) ** (4 * k):
        raise ValueError(f"M = {M} exceeds guard 2^(4k) = {2 ** (4 * k)}")
    if k == 1:
        D = 1
        values = [M, Fraction(1)]
    else:
        a = [1 - Fraction(2 * (t - 1), k - 1) for t in range(k + 1)]
        D = 0
        while chebyshev_value(D, a[0]) < M:
            D += 1
        values = [chebyshev_value(D, at) for at in a]
    b = forward_differences(values, min(D, k))
    poly = SymmetricPoly(k, D, tuple(b))
    if [poly.value(t) for t in range(k + 1)] != values:
        raise ArithmeticError("Newton reconstruction mismatch")
    bound = math.ceil(2 * math.sqrt(k * math.log(M))) + 1
    return ChebyshevReport(poly, M, values, values[0], max(abs(v) for v in values[1:]), bound)


@dataclass
class SignedTable:
    """Real-valued table on ``Σ^k``; entry ``z`` is ``values[idx(z)] / denom``."""

    alphabet: int
    k: int
    values: np.ndarray
    denom: int = 1

    def __post_init__(self):
        if self.alphabet == 2 and self.k > BOOLEAN_ARITY_GUARD:
            raise ValueError(f"boolean arity {self.k} exceeds guard {BOOLEAN_ARITY_GUARD}")
        if len(self.values) != self.alphabet**self.k:
            raise ValueError("table size must be |Σ|^k")

    def _exact(self, v) -> Fraction | float:
        if isinstance(v, (int, np.integer)):
            return Fraction(int(v), self.denom)
        if isinstance(v, Fraction):
            return v / self.denom
        return float(v) / self.denom

    def __getitem__(self, z: tuple[int, ...]) -> Fraction | float:
        return self._exact(self.values[self.index(z)])

    def index(self, z: tuple[int, ...]) -> int:
        return sum(zi * self.alphabet**i for i, zi in enumerate(z))

    def point(self, idx: int) -> tuple[int, ...]:
        return tuple((idx // self.alphabet**i) % self.alphabet for i in range(self.k))

    def l1(self) -> Fraction | float:
        return self._exact(sum(abs(v) for v in self.values))

    def peak(self) -> tuple[int, Fraction | float]:
        """Index and absolute value of the largest entry (first on ties)."""
        mags = np.abs(self.values)
        idx = int(np.argmax(mags))
        return idx, self._exact(mags[idx])

    def total(self) -> Fraction | float:
        return self._exact(self.values.sum())

    def cube(self) -> np.ndarray:
        # numpy is row-major, so axis k-1-i holds coordinate i
        return self.values.reshape((self.alphabet,) * self.k) if self.k else self.values.reshape(())

    @classmethod
    def from_values(cls, alphabet: int, k: int, values: Iterable, denom: int = 1) -> SignedTable:
        vals = list(values)
        exact = all(isinstance(v, (int, np.integer)) for v in vals)
        arr = np.array(vals, dtype=np.int64 if exact else object)
        return cls(alphabet, k, arr, denom)


def conditional_mass(f: SignedTable, Y: Iterable[int]) -> Fraction | float:
    """``Σ_y |Σ_{z : z_Y = y} f(z)|``."""
    Y = set(Y)
    if not Y <= set(range(f.k)):
        raise ValueError(f"Y must be a subset of range({f.k})")
    axes = tuple(f.k - 1 - i for i in range(f.k) if i not in Y)
    sums = f.cube().sum(axis=axes) if axes else f.cube()
    return f._exact(sum(abs(v) for v in np.asarray(sums, dtype=f.values.dtype).ravel()))


def superset_sums(h: SignedTable) -> np.ndarray:
    """``S[Y] = Σ_{x ⊇ Y} h(x)`` for every mask ``Y`` (unscaled by denom)."""
    if h.alphabet != 2:
        raise ValueError("superset sums need a boolean table")
    a = h.values.copy()
    for i in range(h.k):
        view = a.reshape(-1, 2, 1 << i)
        view[:, 0, :] += view[:, 1, :]
    return a


def walsh_coefficients(f: SignedTable) -> np.ndarray:
    """Unnormalized Fourier coefficients ``Σ_x f(x) Π_{i∈S} x_i`` on ``{-1,1}^k``."""
    a = f.values.copy()
    for i in range(f.k):
        view = a.reshape(-1, 2, 1 << i)
        lo, hi = view[:, 0, :].copy(), view[:, 1, :].copy()
        view[:, 0, :] = lo + hi
        view[:, 1, :] = hi - lo
    return a


def reduce_alphabet(
    f: SignedTable | Mapping[tuple[int, ...], object], z_star: tuple[int, ...], k: int | None = None
) -> SignedTable:
    """Fold a table over ``Σ^k`` onto ``{0,1}^k``: ``x_i = 0`` iff ``z_i = z*_i``.

    ``f`` may be a dense table or a sparse mapping from points to values.
    """
    if isinstance(f, SignedTable):
        k, denom = f.k, f.denom
        items = ((f.point(i), v) for i, v in enumerate(f.values) if v != 0)
        exact = f.values.dtype != object
    else:
        if k is None:
            k = len(z_star)
        denom = 1
        items = f.items()
        exact = False
    if len(z_star) != k:
        raise ValueError("z_star must have k coordinates")
    out = np.zeros(1 << k, dtype=np.int64) if exact else np.array([0] * (1 << k), dtype=object)
    for z, v in items:
        if len(z) != k:
            raise ValueError(f"point {z} has wrong arity")
        x = sum(1 << i for i in range(k) if z[i] != z_star[i])
        out[x] += v
    return SignedTable(2, k, out, denom)


@dataclass
class PeakSubset:
    Y: tuple[int, ...]
    mass: Fraction | float
    s_y: Fraction | float
    bound: Fraction
    poly: SymmetricPoly


def find_peak_subset(h: SignedTable, epsilon: Fraction | float) -> PeakSubset:
    """Subset ``Y`` with large superset sum, peak assumed at ``0^k``."""
    if h.alphabet != 2:
        raise ValueError("find_peak_subset needs a boolean table")
    eps = Fraction(epsilon)
    if h.l1() > 1:
        raise ValueError(f"premise violated: l1 mass {h.l1()} > 1")
    if abs(h[(0,) * h.k]) < eps:
        raise ValueError(f"premise violated: |h(0)| = {abs(h[(0,) * h.k])} < epsilon = {eps}")
    poly = chebyshev_symmetric(h.k, 2 / eps).poly
    sums = superset_sums(h)
    best_key, best_mask = None, None
    for size in range(min(poly.effective_degree, h.k) + 1):
        if poly.b[size] == 0:
            continue
        for Y in combinations(range(h.k), size):
            mask = sum(1 << i for i in Y)
            mag = abs(sums[mask])
            # larger magnitude first, then smaller |Y|, then lexicographic
            if best_key is None or mag > best_key:
                best_key, best_mask = mag, Y
    s_y = h._exact(sums[sum(1 << i for i in best_mask)])
    return PeakSubset(best_mask, conditional_mass(h, best_mask), s_y, 1 / poly.coefficient_sum, poly)


def planted_table(rng, k: int, epsilon: Fraction | float, den: int = 10**6, at_origin: bool = True) -> SignedTable:
    """Random boolean table with l1 mass exactly 1 and a peak of at least ``epsilon``.

    The peak is exactly ``epsilon`` unless ``epsilon * 2^k`` is too small to
    leave room below it, in which case it is raised to the least feasible
    value.  Values are integers over ``den``; every other entry is strictly
    smaller than the peak.  ``rng`` is a ``random.Random``.
    """
    size = 1 << k
    peak = int(Fraction(epsilon) * den)
    if not 0 < peak <= den:
        raise ValueError("epsilon * den must be a positive integer at most den")
    if size > 1:
        peak = max(peak, den // size + 2)
    rest = den - peak
    if size == 1:
        return SignedTable.from_values(2, k, [peak * rng.choice((-1, 1))], den)
    # split the remaining mass; entries that would reach the peak are capped
    # and the excess is moved to the peak's sign-free leftover bucket
    cuts = sorted(rng.randrange(rest + 1) for _ in range(size - 2))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [rest])]
    cap = max(peak - 1, 0)
    spill = sum(max(0, x - cap) for x in parts)
    parts = [min(x, cap) for x in parts]
    for j in range(len(parts)):
        room = cap - parts[j]
        move = min(room, spill)
        parts[j] += move
        spill -= move
    if spill:
        raise ValueError("epsilon too small for this arity: cannot keep the peak maximal")
    vals = [x * rng.choice((-1, 1)) for x in parts]
    vals.insert(0 if at_origin else rng.randrange(size), peak * rng.choice((-1, 1)))
    return SignedTable.from_values(2, k, vals, den)


def orient_peak(f: SignedTable) -> tuple[SignedTable, tuple[int, ...]]:
    """Relabel a table so its largest entry sits at the origin."""
    idx, _ = f.peak()
    z_star = f.point(idx)
    return reduce_alphabet(f, z_star), z_star


@dataclass
class CounterexampleCert:
    k: int
    r: int
    Q: tuple[Fraction, ...]  # normalized values Q(0..k)
    table: SignedTable  # f_Q on {-1,1}^k, set bit = +1
    epsilon_cert: Fraction
    objective: Fraction  # LP optimum before normalization

    @property
    def psi(self) -> list[Fraction]:
        return [math.comb(self.k, i) * (-1) ** i * q for i, q in enumerate(self.Q)]


def tight_counterexample(k: int, r: int) -> CounterexampleCert:
    """Minimize ``Σ_i C(k,i)|Q(i)|`` over ``deg Q <= r`` with ``Q(0) = 1``."""
    if not 0 <= r < k:
        raise ValueError(f"need 0 <= r < k, got r={r}, k={k}")
    # variables: Q(i) = p_i - n_i; p at 0..k, n at k+1..2k+1
    n = 2 * (k + 1)
    c = [math.comb(k, i) for i in range(k + 1)] * 2
    A, b = [], []
    row = [0] * n
    row[0], row[k + 1] = 1, -1
    A.append(row)
    b.append(1)
    for m in range(r + 1, k + 1):
        row = [0] * n
        for j in range(m + 1):
            coef = (-1) ** (m - j) * math.comb(m, j)
            row[j], row[k + 1 + j] = coef, -coef
        A.append(row)
        b.append(0)
    res = solve_lp(c, A, b)
    if res.status != "optimal":
        raise ArithmeticError(f"LP {res.status}")
    opt = res.objective
    # optima are not unique in general; among them minimize |Q(1)|, then
    # |Q(2)|, ... so the certificate is canonical
    A.append(c)
    b.append(opt)
    for i in range(1, k + 1):
        sub = [0] * n
        sub[i] = sub[k + 1 + i] = 1
        res = solve_lp(sub, A, b)
        A.append(sub)
        b.append(res.objective)
    Q = tuple((res.x[i] - res.x[k + 1 + i]) / opt for i in range(k + 1))
    vals = []
    for x in range(1 << k):
        plus = bin(x).count("1")
        sign = -1 if (k - plus) % 2 else 1
        vals.append(sign * Q[plus])
    table = SignedTable(2, k, np.array(vals, dtype=object))
    return CounterexampleCert(k, r, Q, table, abs(Q[0]), opt)
