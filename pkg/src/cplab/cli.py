"""``cplab`` command line: instance generation, cross-checks, certificates, protocol runs."""

from __future__ import annotations

import argparse
import csv
import io
import random
import sys
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TextIO

from cplab.butterfly import MultiInstance
from cplab.cellprobe_sim import POSTERIOR_GUARD, ButterflyToy, ProtocolConfig, derive_seed, estimate_advantage
from cplab.parity_search import (
    InstanceFile,
    QuerySpec,
    format_instance,
    parse_instance,
    reference_answers,
    sample_hard_distribution,
)
from cplab.peak_to_average import (
    chebyshev_symmetric,
    find_peak_subset,
    orient_peak,
    planted_table,
    tight_counterexample,
)
from cplab.polyeval import format_poly_instance, random_poly_instance
from cplab import reductions

EDGE_GUARD = 1 << 20
TABLE_GUARD = 20  # largest k for dense 2^k tables
BATCH_SHAPES = [(ell, B) for ell in (1, 2, 3) for B in (2, 3, 4)]
PTA_COLUMNS = ["mode", "k", "param", "D", "eps_cert", "coef_sum", "Y", "mass", "bound", "ok"]


class CliError(Exception):
    """Reported as ``error: <kind>: <message>`` with exit status 2."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# -- gen -----------------------------------------------------------------------


def hard_instance_text(seed: int, ell: int, B: int, queries: int) -> str:
    """Hard-distribution instance; the sampled query first, then extra uniform ones."""
    sample = sample_hard_distribution(seed, ell, B)
    inst = sample.instance
    rng = random.Random(derive_seed(seed, "queries"))
    qs = [sample.query] + [QuerySpec(rng.randrange(inst.universe), rng.randrange(inst.universe)) for _ in range(queries - 1)]
    lines = [f"param {ell} {B}"]
    for i in range(ell, 0, -1):
        lines.append(f"# epoch {i} depth {inst.graph(i).depth} edges {len(sample.epochs[i])}")
        lines.extend(format_instance(inst, sample.epochs[i], []).splitlines()[1:])
    lines.extend(format_instance(inst, [], qs).splitlines()[1:])
    return "\n".join(lines) + "\n"


def cmd_gen(args) -> int:
    if args.poly:
        if not 1 <= args.d <= 16:
            raise CliError("guard", f"d={args.d} outside 1..16")
        if args.n < 0:
            raise CliError("bad_flag", "n must be non-negative")
        inst = random_poly_instance(random.Random(derive_seed(args.seed, "poly")), args.d, args.n, args.queries)
        emit(args.out, format_poly_instance(inst))
        return 0
    check_shape(args.ell, args.B)
    edges = MultiInstance(args.ell, args.B).total_edges
    if edges > args.guard:
        raise CliError("guard", f"instance has {edges} edges, above guard {args.guard}")
    if args.queries < 1:
        raise CliError("bad_flag", "need at least one query")
    emit(args.out, hard_instance_text(args.seed, args.ell, args.B, args.queries))
    return 0


# -- xcheck --------------------------------------------------------------------


@dataclass
class Divergence:
    driver: str
    query: int
    s: int
    t: int
    expected: int
    got: int

    def line(self, prefix: str = "") -> str:
        return f"FAIL {prefix}driver={self.driver} query={self.query} s={self.s} t={self.t} expected={self.expected} got={self.got}"


def cross_check(parsed: InstanceFile, drivers: Sequence[str]) -> Divergence | None:
    """First query where a driver disagrees with the reference, or ``None``."""
    expect = reference_answers(parsed)
    for name in drivers:
        if name not in reductions.DRIVERS:
            raise CliError("bad_flag", f"unknown driver {name!r}")
        if name == "range_selection":
            check_selection_ready(parsed)
        try:
            got = reductions.run_driver(reductions.DRIVERS[name](parsed.instance), parsed)
        except (RuntimeError, ValueError) as exc:
            raise CliError("precondition", f"{name}: {exc}") from None
        for j, (a, b) in enumerate(zip(expect, got)):
            if a != b:
                q = parsed.queries[j]
                return Divergence(name, j, q.s, q.t, a, b)
    return None


def check_selection_ready(parsed: InstanceFile) -> None:
    inst = parsed.instance
    seen = {(u.graph, u.edge) for u in parsed.updates}
    if len(seen) != inst.total_edges:
        raise CliError("precondition", f"range_selection needs all {inst.total_edges} edges assigned, file sets {len(seen)}")
    first_q = next((n for n, (kind, _) in enumerate(parsed.order) if kind == "q"), len(parsed.order))
    if first_q < len(parsed.updates):
        raise CliError("precondition", "range_selection needs every update before the first query")


def batch_case(seed: int, queries: int, ell: int | None = None, B: int | None = None) -> str:
    if ell is None or B is None:
        pick = BATCH_SHAPES[derive_seed(seed, "shape") % len(BATCH_SHAPES)]
        ell, B = ell or pick[0], B or pick[1]
    return hard_instance_text(seed, ell, B, queries)


def _batch_one(job) -> tuple[int, str | None]:
    seed, queries, ell, B, drivers = job
    div = cross_check(parse_instance(batch_case(seed, queries, ell, B)), drivers)
    return seed, None if div is None else div.line(f"seed={seed} ")


def cmd_xcheck(args) -> int:
    drivers = [d for d in args.solvers.split(",") if d and d != "reference"]
    if args.batch:
        jobs = [(args.seed + j, args.queries, args.ell, args.B, drivers) for j in range(args.batch)]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_batch_one, jobs))
        else:
            results = [_batch_one(j) for j in jobs]
        fails = [line for _, line in results if line]
        out = fails[:1] if fails else [f"PASS batch={args.batch} drivers={','.join(drivers)}"]
        emit(args.out, "\n".join(out) + "\n")
        return 1 if fails else 0
    if not args.instance:
        raise CliError("bad_flag", "xcheck needs an instance path or --batch")
    try:
        text = Path(args.instance).read_text()
    except OSError as exc:
        raise CliError("io", str(exc)) from None
    try:
        parsed = parse_instance(text)
    except ValueError as exc:
        raise CliError("parse", str(exc)) from None
    div = cross_check(parsed, drivers)
    if div is None:
        emit(args.out, f"PASS queries={len(parsed.queries)} drivers={','.join(drivers)}\n")
        return 0
    emit(args.out, div.line() + "\n")
    return 1


# -- pta -----------------------------------------------------------------------


def fmt(x) -> str:
    return "" if x is None else f"{float(x):.12g}"


def pta_rows(args) -> list[list[str]]:
    k = args.k
    if k is None or k < 1:
        raise CliError("bad_flag", "--k must be a positive integer")
    if args.cheb:
        M = Fraction(args.M)
        try:
            rep = chebyshev_symmetric(k, M)
        except ValueError as exc:
            raise CliError("guard", str(exc)) from None
        coef = rep.poly.coefficient_sum
        return [["cheb", str(k), fmt(M), str(rep.poly.degree), "", fmt(coef), "", "", fmt(1 / coef), str(int(rep.ok))]]
    if k > args.guard:
        raise CliError("guard", f"dense table needs 2^{k} entries, above guard 2^{args.guard}")
    if args.tight:
        r = k // 2 if args.r is None else args.r
        try:
            cert = tight_counterexample(k, r)
        except ValueError as exc:
            raise CliError("guard", str(exc)) from None
        res = find_peak_subset(cert.table, cert.epsilon_cert)
        ok = res.mass >= res.bound
        return [["tight", str(k), str(r), str(r), fmt(cert.epsilon_cert), fmt(cert.objective), ys(res.Y), fmt(res.mass), fmt(res.bound), str(int(ok))]]
    eps = Fraction(args.eps)
    if not 0 < eps <= 1:
        raise CliError("bad_flag", f"eps must lie in (0, 1], got {args.eps}")
    rows = []
    for trial in range(args.trials):
        rng = random.Random(derive_seed(args.seed, "pta", k, eps, trial))
        g, _ = orient_peak(planted_table(rng, k, eps, at_origin=False))
        res = find_peak_subset(g, eps)
        ok = len(res.Y) <= res.poly.degree and res.mass >= res.bound
        rows.append(["find", str(k), fmt(eps), str(res.poly.degree), "", fmt(res.poly.coefficient_sum), ys(res.Y), fmt(res.mass), fmt(res.bound), str(int(ok))])
    return rows


def ys(Y) -> str:
    return ";".join(map(str, Y)) or "-"


def cmd_pta(args) -> int:
    if sum(map(bool, (args.cheb, args.tight, args.find))) != 1:
        raise CliError("bad_flag", "choose exactly one of --cheb, --tight, --find")
    rows = pta_rows(args)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(PTA_COLUMNS)
    wr.writerows(rows)
    emit(args.out, buf.getvalue())
    return 0 if all(row[-1] == "1" for row in rows) else 1


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    check_shape(args.ell, args.B)
    toy = ButterflyToy(args.ell, args.B)
    t_u = args.tu or toy.t_u
    try:
        if args.a is not None:
            config = ProtocolConfig.from_exponent(args.epoch, args.a, args.w, t_u, seed=args.seed, guard=args.guard)
        else:
            config = ProtocolConfig(args.epoch, Fraction(args.p), w=args.w, t_u=t_u, seed=args.seed, guard=args.guard)
        report = estimate_advantage(toy, config, args.trials)
    except ValueError as exc:
        raise CliError("guard", str(exc)) from None
    buf = io.StringIO()
    report.write_csv(buf)
    emit(args.out, buf.getvalue())
    return 0


# -- plumbing ------------------------------------------------------------------


def check_shape(ell: int, B: int) -> None:
    if ell < 1 or B < 2:
        raise CliError("bad_flag", f"need ell >= 1 and B >= 2, got ell={ell} B={B}")


def emit(out: str | None, text: str, stdout: TextIO | None = None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        (stdout or sys.stdout).write(text)


def common_flags(ell: int | None = 2, B: int | None = 2) -> argparse.ArgumentParser:
    # a fresh parent per subcommand: parents share action objects, so defaults would leak
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--ell", type=int, default=ell)
    common.add_argument("--B", type=int, default=B)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cplab")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common_flags()], help="write a random instance")
    g.add_argument("--poly", action="store_true", help="polynomial evaluation instance")
    g.add_argument("--d", type=int, default=4)
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--queries", type=int, default=1)
    g.add_argument("--guard", type=int, default=EDGE_GUARD)
    g.set_defaults(func=cmd_gen)

    x = sub.add_parser("xcheck", parents=[common_flags(None, None)], help="cross-check reduction drivers")
    x.add_argument("instance", nargs="?")
    x.add_argument("--solvers", default="rectangle,range_parity,range_selection")
    x.add_argument("--batch", type=int, default=0, help="number of generated seeds instead of a file")
    x.add_argument("--queries", type=int, default=100)
    x.add_argument("--jobs", type=int, default=1)
    x.set_defaults(func=cmd_xcheck)

    p = sub.add_parser("pta", parents=[common_flags()], help="peak-to-average certificates")
    p.add_argument("--cheb", action="store_true")
    p.add_argument("--tight", action="store_true")
    p.add_argument("--find", action="store_true")
    p.add_argument("--k", type=int)
    p.add_argument("--M", default="2")
    p.add_argument("--r", type=int)
    p.add_argument("--eps", default="0.1")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--guard", type=int, default=TABLE_GUARD)
    p.set_defaults(func=cmd_pta)

    s = sub.add_parser("simulate", parents=[common_flags()], help="one-way protocol experiment")
    s.add_argument("--p", default="1")
    s.add_argument("--a", type=float, default=None, help="use p = 1/(w t_u)^a")
    s.add_argument("--w", type=int, default=8)
    s.add_argument("--tu", type=int, default=None)
    s.add_argument("--epoch", type=int, default=1)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--guard", type=int, default=POSTERIOR_GUARD)
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        if exc.code:
            print("error: bad_flag: could not parse arguments", file=sys.stderr)
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
