"""GF(2^d) arithmetic and least-bit polynomial evaluation.

Elements are residues modulo a fixed irreducible polynomial of degree ``d``,
stored as ``d``-bit integers with bit 0 the constant term.  Addition is XOR.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

# One irreducible modulus per extension degree, including the leading x^d term.
MODULI: dict[int, int] = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}

ORACLE_GUARD = 1 << 20


def _check_degree(d: int) -> None:
    if d not in MODULI:
        raise ValueError(f"extension degree {d} not in 1..16")


def clmul_mod(a: int, b: int, d: int) -> int:
    """Product of two residues modulo ``MODULI[d]`` (shift-and-add)."""
    mod = MODULI[d]
    top = 1 << d
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= mod
    return out


@dataclass(frozen=True)
class FieldElem:
    d: int
    bits: int

    def __post_init__(self):
        _check_degree(self.d)
        if not 0 <= self.bits < (1 << self.d):
            raise ValueError(f"{self.bits:#x} is not a {self.d}-bit residue")

    def _same(self, other: FieldElem) -> None:
        if not isinstance(other, FieldElem):
            raise TypeError(f"expected FieldElem, got {type(other).__name__}")
        if other.d != self.d:
            raise ValueError(f"field mismatch: GF(2^{self.d}) vs GF(2^{other.d})")

    def __add__(self, other: FieldElem) -> FieldElem:
        self._same(other)
        return FieldElem(self.d, self.bits ^ other.bits)

    __sub__ = __add__

    def __mul__(self, other: FieldElem) -> FieldElem:
        return gf_mul(self, other)

    def __pow__(self, e: int) -> FieldElem:
        if e < 0:
            return self.inverse() ** (-e)
        result, base = FieldElem(self.d, 1), self
        while e:
            if e & 1:
                result = gf_mul(result, base)
            base = gf_mul(base, base)
            e >>= 1
        return result

    def inverse(self) -> FieldElem:
        if self.bits == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self ** ((1 << self.d) - 2)

    @property
    def lsb(self) -> int:
        return self.bits & 1

    @classmethod
    def zero(cls, d: int) -> FieldElem:
        return cls(d, 0)

    @classmethod
    def one(cls, d: int) -> FieldElem:
        return cls(d, 1)


def gf_add(a: FieldElem, b: FieldElem) -> FieldElem:
    return a + b


def gf_mul(a: FieldElem, b: FieldElem) -> FieldElem:
    a._same(b)
    return FieldElem(a.d, clmul_mod(a.bits, b.bits, a.d))


@dataclass
class PolyState:
    """Coefficients ``a_0..a_n`` of a polynomial over GF(2^d)."""

    d: int
    n: int
    coeffs: list[FieldElem] = field(default_factory=list)
    regime_guard: bool = False

    def __post_init__(self):
        _check_degree(self.d)
        if self.n < 0:
            raise ValueError("degree bound must be non-negative")
        if self.regime_guard and self.n > 2 ** (self.d / 4):
            raise ValueError(f"n={self.n} exceeds 2^(d/4) for d={self.d}")
        if not self.coeffs:
            self.coeffs = [FieldElem.zero(self.d)] * (self.n + 1)
        elif len(self.coeffs) != self.n + 1:
            raise ValueError("need exactly n+1 coefficients")

    def update(self, i: int, b: FieldElem) -> None:
        if not 0 <= i <= self.n:
            raise IndexError(f"coefficient index {i} out of range [0, {self.n}]")
        self.coeffs[i] = self.coeffs[i] + b

    def evaluate(self, y: FieldElem) -> FieldElem:
        acc = FieldElem.zero(self.d)
        for a in reversed(self.coeffs):
            acc = acc * y + a
        return acc

    def eval_lsb(self, y: FieldElem) -> int:
        return self.evaluate(y).lsb


def poly_update(state: PolyState, i: int, b: FieldElem) -> PolyState:
    state.update(i, b)
    return state


def poly_eval_lsb(state: PolyState, y: FieldElem) -> int:
    return state.eval_lsb(y)


def naive_eval(state: PolyState, y: FieldElem) -> FieldElem:
    """Sum of ``a_i * y^i`` with explicit powers; an oracle for Horner."""
    acc = FieldElem.zero(state.d)
    for i, a in enumerate(state.coeffs):
        acc = acc + a * (y**i)
    return acc


def mul_table(d: int) -> np.ndarray:
    q = 1 << d
    table = np.empty((q, q), dtype=np.int64)
    for a in range(q):
        for b in range(a, q):
            table[a, b] = table[b, a] = clmul_mod(a, b, d)
    return table


@dataclass
class IndependenceReport:
    d: int
    deg: int
    h: int
    polynomials: int
    subsets_checked: int
    expected: Fraction
    passed: bool
    witness: tuple | None = None  # (points, values, observed count)


def kwise_independence_oracle(d: int, h: int, deg: int, points: list[tuple[int, ...]] | None = None) -> IndependenceReport:
    """Exhaustively check that evaluations at ``h`` distinct points are uniform.

    Every polynomial of degree at most ``deg`` is enumerated.  ``points``
    restricts the check to the given point tuples; by default every
    ``h``-subset of the field is examined.
    """
    _check_degree(d)
    q = 1 << d
    npoly = q ** (deg + 1)
    if npoly > ORACLE_GUARD:
        raise ValueError(f"2^(d(deg+1)) = {npoly} polynomials exceeds guard {ORACLE_GUARD}")
    if not 1 <= h <= q:
        raise ValueError(f"need 1 <= h <= {q} distinct points, got {h}")
    table = mul_table(d)
    # coefficient r of polynomial p is digit r of p in base q
    ids = np.arange(npoly, dtype=np.int64)
    coeffs = [(ids // q**r) % q for r in range(deg + 1)]
    xs = np.arange(q)
    evals = np.zeros((npoly, q), dtype=np.int64)
    power = np.ones(q, dtype=np.int64)
    for r in range(deg + 1):
        evals ^= table[coeffs[r][:, None], power[None, :]]
        power = table[power, xs]
    expected = Fraction(npoly, q**h)
    subsets = itertools.combinations(range(q), h) if points is None else points
    checked = 0
    for pts in subsets:
        if len(set(pts)) != h:
            raise ValueError(f"point tuple {pts} must have {h} distinct entries")
        code = np.zeros(npoly, dtype=np.int64)
        for x in pts:
            code = code * q + evals[:, x]
        counts = np.bincount(code, minlength=q**h)
        checked += 1
        bad = np.flatnonzero(counts != expected)
        if bad.size:
            c = int(bad[0])
            values = tuple((c // q ** (h - 1 - m)) % q for m in range(h))
            return IndependenceReport(d, deg, h, npoly, checked, expected, False, (tuple(pts), values, int(counts[c])))
    return IndependenceReport(d, deg, h, npoly, checked, expected, True)


# text format: "pparam <d> <n>", "pu <i> <b-hex>", "pq <y-hex>"


@dataclass
class PolyInstance:
    d: int
    n: int
    ops: list[tuple[str, int, int]]  # ("u", i, b) or ("q", y, 0)


def format_poly_instance(inst: PolyInstance) -> str:
    lines = [f"pparam {inst.d} {inst.n}"]
    for kind, a, b in inst.ops:
        lines.append(f"pu {a} {b:x}" if kind == "u" else f"pq {a:x}")
    return "\n".join(lines) + "\n"


def parse_poly_instance(text: str) -> PolyInstance:
    header = None
    ops: list[tuple[str, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "pparam" and len(tok) == 3 and header is None:
                header = (int(tok[1]), int(tok[2]))
                _check_degree(header[0])
                continue
            if header is None:
                raise ValueError("missing pparam header")
            d, n = header
            if tok[0] == "pu" and len(tok) == 3:
                i, b = int(tok[1]), int(tok[2], 16)
                if not 0 <= i <= n:
                    raise ValueError(f"coefficient index {i} out of range")
                FieldElem(d, b)
                ops.append(("u", i, b))
            elif tok[0] == "pq" and len(tok) == 2:
                y = int(tok[1], 16)
                FieldElem(d, y)
                ops.append(("q", y, 0))
            else:
                raise ValueError(f"unrecognized line {raw!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if header is None:
        raise ValueError("missing pparam header")
    return PolyInstance(header[0], header[1], ops)


def run_poly_instance(inst: PolyInstance) -> list[int]:
    state = PolyState(inst.d, inst.n)
    out = []
    for kind, a, b in inst.ops:
        if kind == "u":
            state.update(a, FieldElem(inst.d, b))
        else:
            out.append(state.eval_lsb(FieldElem(inst.d, a)))
    return out


def random_poly_instance(rng, d: int, n: int, queries: int = 1) -> PolyInstance:
    """Uniform coefficient updates for ``a_0..a_n`` followed by uniform queries."""
    ops = [("u", i, rng.randrange(1 << d)) for i in range(n + 1)]
    ops += [("q", rng.randrange(1 << d), 0) for _ in range(queries)]
    return PolyInstance(d, n, ops)
