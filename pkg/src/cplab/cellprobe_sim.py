"""Cell-probe instrumentation and a desk-scale run of the one-way protocol.

A structure keeps all of its mutable state in a ``CellMemory`` of ``w``-bit
cells.  The memory records, for every cell, the epoch of its last write and
a log of each operation's probes.  On top of that, ``estimate_advantage``
plays the cell-sampling protocol trial by trial:

* Alice samples epoch-``i`` cells privately (``c0``) and through a public
  hash (``c1``), and sends every cell written after epoch ``i`` (``c2``).
* Bob replays the epochs before ``i``, overlays ``c0`` and ``c2``, runs the
  query to get ``S_q``, and decides using an exact posterior over every
  possible epoch-``i`` update sequence.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Hashable, Iterable, Iterator, Protocol, Sequence, TextIO

from cplab.butterfly import MultiInstance, path_edges
from cplab.parity_search import ParitySearchState, QuerySpec, epoch_updates
from cplab.peak_to_average import chebyshev_symmetric, find_peak_subset, reduce_alphabet

POSTERIOR_GUARD = 1 << 20


class ContractViolation(RuntimeError):
    """A structure kept mutable state outside its ``CellMemory``."""


@dataclass(frozen=True)
class Probe:
    address: int
    kind: str  # "r" or "w"
    epoch: int | None  # associated epoch of the cell when probed


class CellMemory:
    """Sparse word-addressed memory; unwritten cells read as 0."""

    def __init__(self, w: int):
        if w < 1:
            raise ValueError("word size must be positive")
        self.w = w
        self.cells: dict[int, int] = {}
        self.epoch_of: dict[int, int] = {}
        self.epoch: int | None = None
        self.update_probes: list[int] = []
        self._log: list[Probe] | None = None

    def begin_epoch(self, i: int) -> None:
        self.epoch = i

    def end_updates(self) -> None:
        self.epoch = None

    def _record(self, address: int, kind: str) -> None:
        if self._log is not None:
            self._log.append(Probe(address, kind, self.epoch_of.get(address)))

    def read(self, address: int) -> int:
        self._record(address, "r")
        return self.cells.get(address, 0)

    def write(self, address: int, value: int) -> None:
        if not 0 <= value < (1 << self.w):
            raise ValueError(f"value {value} does not fit in {self.w} bits")
        self._record(address, "w")
        self.cells[address] = value
        if self.epoch is not None:
            self.epoch_of[address] = self.epoch

    def start_op(self) -> None:
        self._log = []

    def finish_op(self) -> list[Probe]:
        log, self._log = self._log or [], None
        return log

    def cells_of_epoch(self, i: int) -> dict[int, int]:
        return {a: self.cells.get(a, 0) for a, e in sorted(self.epoch_of.items()) if e == i}

    def cells_before(self, i: int) -> dict[int, int]:
        """Cells associated with an epoch numbered below ``i`` (later in time)."""
        return {a: self.cells.get(a, 0) for a, e in sorted(self.epoch_of.items()) if e < i}

    def copy(self) -> CellMemory:
        other = CellMemory(self.w)
        other.cells = dict(self.cells)
        other.epoch_of = dict(self.epoch_of)
        other.epoch = self.epoch
        return other


class MemoryStore:
    """Mapping facade that keeps an index's nodes in ``CellMemory``.

    Keys are assigned addresses ``base, base+1, ...`` in order of first use;
    the key-to-address table is static layout, not content.
    """

    def __init__(self, mem: CellMemory, base: int = 0):
        self.mem = mem
        self.base = base
        self._addr: dict[Hashable, int] = {}

    def address(self, key: Hashable) -> int:
        if key not in self._addr:
            self._addr[key] = self.base + len(self._addr)
        return self._addr[key]

    def get(self, key: Hashable, default: int = 0) -> int:
        return self.mem.read(self.address(key))

    def __getitem__(self, key: Hashable) -> int:
        return self.get(key)

    def __setitem__(self, key: Hashable, value: int) -> None:
        self.mem.write(self.address(key), value)


class CellProbeStructure(Protocol):
    def update(self, mem: CellMemory, u: Any) -> None: ...

    def query(self, mem: CellMemory, q: Any) -> int: ...


@dataclass
class ProbeTrace:
    probes: list[Probe]
    answer: int | None = None

    @property
    def T_q(self) -> int:
        return len(self.probes)

    @property
    def per_epoch(self) -> Counter:
        """Probe counts keyed by associated epoch; ``None`` is never written."""
        return Counter(p.epoch for p in self.probes)

    def T_q_i(self, i: int) -> int:
        return self.per_epoch.get(i, 0)

    @property
    def addresses(self) -> list[int]:
        """Distinct probed addresses in first-probe order."""
        return list(dict.fromkeys(p.address for p in self.probes))

    def epoch_cells(self, i: int) -> set[int]:
        return {p.address for p in self.probes if p.epoch == i}


def _state_of(ds: Any) -> Any:
    return copy.deepcopy(vars(ds)) if hasattr(ds, "__dict__") else None


def _checked(ds: Any, op: str, *args, check: bool = True) -> Any:
    if not check:
        return getattr(ds, op)(*args)
    before = _state_of(ds)
    result = getattr(ds, op)(*args)
    if _state_of(ds) != before:
        raise ContractViolation(f"{type(ds).__name__}.{op} changed state outside CellMemory")
    return result


def apply_epochs(
    ds: CellProbeStructure, mem: CellMemory, epochs: Iterable[tuple[int, Sequence[Any]]], check: bool = True
) -> list[int]:
    """Run update groups in time order; returns per-update probe counts.

    ``check`` snapshots the structure around every call to catch state kept
    outside memory; replays of an already-checked structure may skip it.
    """
    counts = []
    for i, updates in epochs:
        mem.begin_epoch(i)
        for u in updates:
            mem.start_op()
            _checked(ds, "update", mem, u, check=check)
            counts.append(len(mem.finish_op()))
    mem.end_updates()
    return counts


def trace_query(ds: CellProbeStructure, mem: CellMemory, q: Any, check: bool = True) -> ProbeTrace:
    mem.start_op()
    answer = _checked(ds, "query", mem, q, check=check)
    return ProbeTrace(mem.finish_op(), answer)


def run_with_trace(
    ds: CellProbeStructure, epochs: Sequence[tuple[int, Sequence[Any]]], q: Any, w: int = 8
) -> tuple[CellMemory, ProbeTrace]:
    """Apply epochs (time order, each tagged with its index), then trace ``q``."""
    mem = CellMemory(w)
    mem.update_probes = apply_epochs(ds, mem, epochs)
    return mem, trace_query(ds, mem, q)


def group_into_epochs(updates: Sequence[Any], beta: int, ell: int) -> list[tuple[int, list[Any]]]:
    """Split a stream into epochs ``ell, ..., 1`` of sizes ``beta^ell, ..., beta``."""
    sizes = [beta**i for i in range(ell, 0, -1)]
    if sum(sizes) != len(updates):
        raise ValueError(f"need {sum(sizes)} updates for beta={beta}, ell={ell}; got {len(updates)}")
    out, pos = [], 0
    for i, n in zip(range(ell, 0, -1), sizes):
        out.append((i, list(updates[pos : pos + n])))
        pos += n
    return out


# --- toy problem -----------------------------------------------------------


class ToyProblem(Protocol):
    ell: int
    t_u: int
    t_q: int

    def epoch_size(self, i: int) -> int: ...

    def epoch_space(self, i: int) -> int: ...

    def sample_epoch(self, i: int, rng: random.Random) -> list: ...

    def enumerate_epoch(self, i: int) -> Iterator[list]: ...

    def queries(self) -> list: ...

    def answer(self, epochs: dict[int, list], q: Any) -> int: ...

    def structure(self) -> CellProbeStructure: ...


class EdgeCellStructure:
    """One cell per Butterfly edge holding its weight; queries XOR the path."""

    def __init__(self, instance: MultiInstance):
        self.instance = instance
        offsets, base = {}, 0
        for i in range(1, instance.ell + 1):
            offsets[i] = base
            base += instance.edge_count(i)
        self.offsets = offsets

    def address(self, graph: int, edge) -> int:
        return self.offsets[graph] + self.instance.graph(graph).edge_position(edge)

    def update(self, mem: CellMemory, u) -> None:
        mem.write(self.address(u.graph, u.edge), u.weight)

    def query(self, mem: CellMemory, q: QuerySpec) -> int:
        bit = 0
        for i in range(self.instance.ell, 0, -1):
            s, t = self.instance.source_sink(i, q.s, q.t)
            for e in path_edges(s, t, self.instance.graph(i)):
                bit ^= mem.read(self.address(i, e))
        return bit


class ButterflyToy:
    """Parity searching under the hard distribution with an edge-table structure."""

    def __init__(self, ell: int = 2, B: int = 2):
        self.instance = MultiInstance(ell, B)
        self.ell = ell
        self.t_u = 1
        self.t_q = self.instance.delta

    def epoch_size(self, i: int) -> int:
        return self.instance.edge_count(i)

    def epoch_space(self, i: int) -> int:
        return 2 ** self.epoch_size(i)

    def sample_epoch(self, i: int, rng: random.Random) -> list:
        return epoch_updates(self.instance, i, [rng.randrange(2) for _ in range(self.epoch_size(i))])

    def enumerate_epoch(self, i: int) -> Iterator[list]:
        n = self.epoch_size(i)
        for code in range(2**n):
            yield epoch_updates(self.instance, i, [(code >> j) & 1 for j in range(n)])

    def queries(self) -> list:
        U = self.instance.universe
        return [QuerySpec(s, t) for s in range(U) for t in range(U)]

    def answer(self, epochs: dict[int, list], q: QuerySpec) -> int:
        state = ParitySearchState(self.instance)
        for i in sorted(epochs, reverse=True):
            for u in epochs[i]:
                state.apply(u)
        return state.answer_query(q)

    def structure(self) -> EdgeCellStructure:
        return EdgeCellStructure(self.instance)


# --- protocol ----------------------------------------------------------------


@dataclass
class ProtocolConfig:
    epoch: int
    p: Fraction
    w: int = 8
    t_u: int | None = None  # defaults to the problem's
    t_q: int | None = None
    seed: int = 0
    guard: int = POSTERIOR_GUARD
    threshold: Fraction | None = None  # default p^(32 t_q / ell) / 4

    def __post_init__(self):
        self.p = Fraction(self.p)
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @classmethod
    def from_exponent(cls, epoch: int, a: float, w: int, t_u: int, **kw) -> ProtocolConfig:
        """``p = 1 / (w t_u)^a``."""
        return cls(epoch, Fraction(1 / (w * t_u) ** a), w=w, t_u=t_u, **kw)


def derive_seed(seed: int, *labels: Any) -> int:
    """Deterministic 64-bit stream split: ``blake2b(seed:label:...)``."""
    text = ":".join(str(x) for x in (seed, *labels)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


def public_sample(public_seed: int, address: int, p: Fraction) -> bool:
    """Whether ``address`` lies in the public sample (a keyed hash below ``p``)."""
    return Fraction(derive_seed(public_seed, address), 1 << 64) < p


@dataclass
class AliceMessage:
    flag0: int
    c0: dict[int, int]
    flag1: int
    c1: dict[int, int]
    c2: dict[int, int]
    bits: int
    cap_cells: Fraction
    bit_cap: Fraction


def alice_messages(
    mem: CellMemory, epoch: int, p: Fraction, n_i: int, t_u: int, n_later: int, rng: random.Random, public_seed: int
) -> AliceMessage:
    """Build ``c0``, ``c1`` and ``c2``; ``n_later`` is the update count of epochs below ``epoch``."""
    w = mem.w
    cap = 2 * p * n_i * t_u
    bit_cap = 2 * (1 + cap * 2 * w) + 2 * w * t_u * n_later
    mine = mem.cells_of_epoch(epoch)
    c0 = {a: v for a, v in mine.items() if rng.random() < p}
    if len(c0) > cap:
        return AliceMessage(0, {}, 0, {}, {}, 1, cap, bit_cap)
    bits = 1 + 2 * w * len(c0)
    c1 = {a: v for a, v in mine.items() if public_sample(public_seed, a, p)}
    if len(c1) > cap:
        return AliceMessage(1, c0, 0, {}, {}, bits + 1, cap, bit_cap)
    bits += 1 + 2 * w * len(c1)
    c2 = mem.cells_before(epoch)
    bits += 2 * w * len(c2)
    return AliceMessage(1, c0, 1, c1, c2, bits, cap, bit_cap)


@dataclass
class _Candidate:
    weight: Fraction
    mem: CellMemory
    answer: int
    trace: ProbeTrace


class Posterior:
    """Exact posterior over epoch-``i`` update sequences given ``(u_-i, c0, c2)``.

    The prior is uniform over ``problem.enumerate_epoch(i)``.  A candidate's
    weight is the probability that Alice's private sample equals ``c0``,
    times the indicator that it reproduces ``c2``.
    """

    def __init__(
        self,
        problem: ToyProblem,
        known: dict[int, list],
        epoch: int,
        c0: dict[int, int],
        c2: dict[int, int],
        p: Fraction,
        q: Any,
        w: int,
        guard: int = POSTERIOR_GUARD,
    ):
        space = problem.epoch_space(epoch)
        if space > guard:
            raise ValueError(f"epoch {epoch} has {space} update sequences, above guard {guard}")
        ds = problem.structure()
        base = CellMemory(w)
        apply_epochs(ds, base, [(j, known[j]) for j in sorted(known, reverse=True) if j > epoch])
        later = [(j, known[j]) for j in sorted(known, reverse=True) if j < epoch]
        self.candidates: list[_Candidate] = []
        for u_i in problem.enumerate_epoch(epoch):
            mem = base.copy()
            apply_epochs(ds, mem, [(epoch, u_i)] + later, check=False)
            wt = _sample_likelihood(mem, epoch, c0, c2, p)
            if wt == 0:
                continue
            epochs = dict(known)
            epochs[epoch] = u_i
            self.candidates.append(_Candidate(wt, mem, problem.answer(epochs, q), trace_query(ds, mem, q, check=False)))
        self.total = sum((c.weight for c in self.candidates), Fraction(0))
        self.epoch = epoch
        self.c0 = c0

    def prob_w(self) -> Fraction:
        """Posterior probability that ``c0`` covers the true query's epoch-i cells."""
        hit = sum((c.weight for c in self.candidates if c.trace.epoch_cells(self.epoch) <= self.c0.keys()), Fraction(0))
        return hit / self.total

    def f_table(self, S_q: Sequence[int]) -> dict[tuple[int, ...], Fraction]:
        """``f(z) = eta(z) - mu(z) / 2`` over contents ``z`` of ``S_q``."""
        f: dict[tuple[int, ...], Fraction] = {}
        for c in self.candidates:
            z = tuple(c.mem.cells.get(a, 0) for a in S_q)
            share = c.weight / self.total
            f[z] = f.get(z, Fraction(0)) + share * (c.answer - Fraction(1, 2))
        return f

    def bias(self, Y: Sequence[int] = (), y: Sequence[int] = ()) -> Fraction:
        """``Pr[answer = 1 | contents of addresses Y equal y]``."""
        num = den = Fraction(0)
        for c in self.candidates:
            if all(c.mem.cells.get(a, 0) == v for a, v in zip(Y, y)):
                den += c.weight
                num += c.weight * c.answer
        if den == 0:
            raise ValueError("conditioning event has zero posterior probability")
        return num / den


def _sample_likelihood(mem: CellMemory, epoch: int, c0: dict[int, int], c2: dict[int, int], p: Fraction) -> Fraction:
    if mem.cells_before(epoch) != c2:
        return Fraction(0)
    mine = mem.cells_of_epoch(epoch)
    for a, v in c0.items():
        if mine.get(a) != v or a not in mine:
            return Fraction(0)
    return p ** len(c0) * (1 - p) ** (len(mine) - len(c0))


def posterior_bias(
    problem: ToyProblem,
    known: dict[int, list],
    epoch: int,
    c0: dict[int, int],
    c2: dict[int, int],
    p: Fraction,
    q: Any,
    Y: Sequence[int] = (),
    y: Sequence[int] = (),
    w: int = 8,
) -> Fraction:
    return Posterior(problem, known, epoch, c0, c2, p, q, w).bias(Y, y)


@lru_cache(maxsize=4096)
def _peak_polynomial_ok(k: int, eps: Fraction) -> bool:
    try:
        chebyshev_symmetric(k, 2 / eps)
    except ValueError:
        return False
    return True


@dataclass
class BobResult:
    S_q: list[int]
    replay: int
    branch: str
    output: int
    good: bool
    prob_w: Fraction | None = None
    Y: tuple[int, ...] = ()
    Y_in_c1: bool = False


def bob_simulate(
    problem: ToyProblem,
    known: dict[int, list],
    msg: AliceMessage,
    q: Any,
    config: ProtocolConfig,
    public_seed: int,
    coin: random.Random,
) -> BobResult:
    """Decode Alice's message; ``known`` holds every epoch except ``config.epoch``."""
    i = config.epoch
    t_q = config.t_q or problem.t_q
    ds = problem.structure()
    mem = CellMemory(config.w)
    apply_epochs(ds, mem, [(j, known[j]) for j in sorted(known, reverse=True) if j > i])
    for a, v in {**msg.c0, **msg.c2}.items():
        mem.cells[a] = v
    trace = trace_query(ds, mem.copy(), q)
    S_q, replay = trace.addresses, trace.answer
    flip = coin.randrange(2)
    if not (msg.flag0 and msg.flag1):
        return BobResult(S_q, replay, "abort", flip, False)
    post = Posterior(problem, known, i, msg.c0, msg.c2, config.p, q, config.w, config.guard)
    pw = post.prob_w()
    threshold = config.threshold if config.threshold is not None else config.p ** Fraction(32 * t_q, problem.ell) / 4
    good = pw >= threshold and len(S_q) <= 32 * t_q
    if not good:
        return BobResult(S_q, replay, "not_good", flip, False, pw)
    k = len(S_q)
    if k == 0:
        Y: tuple[int, ...] = ()
    else:
        z_star = tuple(mem.cells.get(a, 0) for a in S_q)
        h = reduce_alphabet(post.f_table(S_q), z_star, k)
        eps = abs(h[(0,) * k])
        if eps == 0 or not _peak_polynomial_ok(k, eps):
            return BobResult(S_q, replay, "no_peak", flip, True, pw)
        Y = tuple(S_q[j] for j in find_peak_subset(h, eps).Y)
    in_c1 = all(public_sample(public_seed, a, config.p) for a in Y)
    if not in_c1:
        return BobResult(S_q, replay, "y_missing", flip, True, pw, Y, False)
    y = [msg.c1[a] if a in msg.c1 else mem.cells.get(a, 0) for a in Y]
    try:
        out = int(post.bias(Y, y) > Fraction(1, 2))
    except ValueError:
        return BobResult(S_q, replay, "inconsistent", flip, True, pw, Y, True)
    return BobResult(S_q, replay, "ml", out, True, pw, Y, True)


@dataclass
class TrialRecord:
    trial: int
    epoch: int
    c0: int
    c1: int
    c2: int
    bits: int
    W_q: bool
    good: bool
    Y_size: int
    Y_in_c1: bool
    output: int
    truth: int
    replay: int
    branch: str
    T_q: int
    T_q_i: int
    within_cap: bool


CSV_COLUMNS = ["trial", "epoch", "c0", "c1", "c2", "bits", "W_q", "good", "Y_size", "Y_in_c1", "output", "truth"]


@dataclass
class AdvantageReport:
    config: ProtocolConfig
    records: list[TrialRecord] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.records)

    @property
    def advantage(self) -> float:
        return sum(r.output == r.truth for r in self.records) / self.trials - 0.5

    @property
    def pr_w(self) -> float:
        return sum(r.W_q for r in self.records) / self.trials

    @property
    def pr_w_expected(self) -> float:
        """Average of ``p^(T_q^i)``: the exact W_q probability given each trace."""
        p = float(self.config.p)
        return sum(p**r.T_q_i for r in self.records) / self.trials

    @property
    def pr_good(self) -> float:
        return sum(r.good for r in self.records) / self.trials

    @property
    def max_T_q_i(self) -> int:
        return max(r.T_q_i for r in self.records)

    @property
    def w_correct(self) -> tuple[int, int]:
        """(replays equal to truth, trials) over trials where W_q held."""
        hits = [r for r in self.records if r.W_q]
        return sum(r.replay == r.truth for r in hits), len(hits)

    @property
    def all_within_cap(self) -> bool:
        return all(r.within_cap for r in self.records)

    def write_csv(self, fh: TextIO) -> None:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in self.records:
            wr.writerow([r.trial, r.epoch, r.c0, r.c1, r.c2, r.bits, int(r.W_q), int(r.good), r.Y_size, int(r.Y_in_c1), r.output, r.truth])
        n = self.trials
        mean = lambda attr: f"{sum(getattr(r, attr) for r in self.records) / n:.6f}"  # noqa: E731
        wc, wn = self.w_correct
        wr.writerow(
            [
                "summary",
                self.config.epoch,
                mean("c0"),
                mean("c1"),
                mean("c2"),
                max(r.bits for r in self.records),
                f"{self.pr_w:.6f}",
                f"{self.pr_good:.6f}",
                mean("Y_size"),
                mean("Y_in_c1"),
                f"{self.advantage + 0.5:.6f}",
                mean("truth"),
            ]
        )
        fh.write(
            f"# advantage={self.advantage:.6f} pr_w={self.pr_w:.6f} pr_w_expected={self.pr_w_expected:.6f} "
            f"max_T_q_i={self.max_T_q_i} w_correct={wc}/{wn} within_cap={int(self.all_within_cap)}\n"
        )


def run_trial(problem: ToyProblem, config: ProtocolConfig, trial: int) -> TrialRecord:
    i = config.epoch
    if not 1 <= i <= problem.ell:
        raise ValueError(f"epoch {i} outside 1..{problem.ell}")
    t_u = config.t_u or problem.t_u
    data = random.Random(derive_seed(config.seed, "data", trial))
    epochs = {j: problem.sample_epoch(j, data) for j in range(problem.ell, 0, -1)}
    qs = problem.queries()
    q = qs[data.randrange(len(qs))]
    truth = problem.answer(epochs, q)

    ds = problem.structure()
    mem, trace = run_with_trace(ds, [(j, epochs[j]) for j in range(problem.ell, 0, -1)], q, config.w)
    public_seed = derive_seed(config.seed, "public", trial)
    n_later = sum(problem.epoch_size(j) for j in range(1, i))
    msg = alice_messages(
        mem, i, config.p, problem.epoch_size(i), t_u, n_later, random.Random(derive_seed(config.seed, "alice", trial)), public_seed
    )
    known = {j: u for j, u in epochs.items() if j != i}
    bob = bob_simulate(problem, known, msg, q, config, public_seed, random.Random(derive_seed(config.seed, "bob", trial)))
    w_q = bool(msg.flag0) and trace.epoch_cells(i) <= msg.c0.keys()
    return TrialRecord(
        trial,
        i,
        len(msg.c0),
        len(msg.c1),
        len(msg.c2),
        msg.bits,
        w_q,
        bob.good,
        len(bob.Y),
        bob.Y_in_c1,
        bob.output,
        truth,
        bob.replay,
        bob.branch,
        trace.T_q,
        trace.T_q_i(i),
        len(msg.c0) <= msg.cap_cells and len(msg.c1) <= msg.cap_cells and msg.bits <= msg.bit_cap,
    )


def estimate_advantage(problem: ToyProblem, config: ProtocolConfig, trials: int) -> AdvantageReport:
    if problem.epoch_space(config.epoch) > config.guard:
        raise ValueError(
            f"epoch {config.epoch} has {problem.epoch_space(config.epoch)} update sequences, above guard {config.guard}"
        )
    report = AdvantageReport(config)
    for t in range(trials):
        report.records.append(run_trial(problem, config, t))
    return report
