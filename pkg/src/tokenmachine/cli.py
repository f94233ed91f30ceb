"""Command-line workbench around the evaluator, machines, and benches.

Subcommands
-----------
run      — evaluate one term file with a chosen machine, print counters
           and the result, optionally writing a JSONL trace, DOT
           snapshots, and a per-step CSV series.
compare  — run the reference evaluator and the rewriting machine in
           lockstep and verify the final graph and readback.
bench    — produce the cost table for the scaling families and verify
           the ratio fits.
gen      — write a deterministic corpus of random closed terms.
replay   — re-check the counter totals recorded in a trace file.

Exit codes: 0 success; 1 usage, unparsable or open input, or an
unsupported strategy/machine combination; 2 fuel exhausted; 3 stuck
state or failed invariant; 4 lockstep violation; 5 final-result
mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from typing import Optional

from .baselines import (
    BaselineStuck,
    Closure,
    Cons,
    JumpMachine,
    SignatureMachine,
    final_value_code,
)
from .bench import FAMILIES, STRATEGIES, bench_rows, format_table, ratio_checks, write_csv
from .corpus import generate
from .graph import isomorphic, to_dot
from .machine import LinkRef, Machine, cosimulate
from .smallstep import evaluate
from .terms import ParseError, Strategy, alpha_eq, free_vars, parse, render, size
from .translate import canonical_answer, readback, translate_term

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FUEL = 2
EXIT_STUCK = 3
EXIT_LOCKSTEP = 4
EXIT_MISMATCH = 5

MACHINES = ("rewrites-first", "passes-only", "jumping", "oracle")

_OUTCOME_EXIT = {
    "final": EXIT_OK,
    "answer": EXIT_OK,
    "fuel": EXIT_FUEL,
    "stuck": EXIT_STUCK,
}


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors share exit code 1 with term
    parse errors, keeping 2 free to mean fuel exhaustion."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- serialization helpers -------------------------------------------------


def _stack_item(item) -> str:
    """Render one stack entry as a short identifier for traces."""
    if isinstance(item, LinkRef):
        return item.link
    if isinstance(item, Cons):
        return f"c({item.link},{_stack_item(item.rest)})"
    if isinstance(item, Closure):
        return f"clo({item.link},{len(item.env)})"
    return str(item)


class _TraceWriter:
    def __init__(self, path: Optional[str]):
        self.fh = open(path, "w", encoding="utf-8") if path else None

    def entry(self, record: dict) -> None:
        if self.fh is not None:
            self.fh.write(json.dumps(record, sort_keys=True) + "\n")

    def summary(self, machine: str, outcome: str, counts: dict, steps: int) -> None:
        self.entry(
            {
                "summary": True,
                "machine": machine,
                "outcome": outcome,
                "counts": dict(counts),
                "steps": steps,
            }
        )

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()
            self.fh = None


class _SeriesWriter:
    """Per-step CSV series (sampled size metrics) for the run command."""

    HEADER = "step,kind,label,weight,sDepth,bDepth,graphSize,tokenCells"

    def __init__(self, path: Optional[str]):
        self.fh = open(path, "w", encoding="utf-8", newline="") if path else None
        if self.fh is not None:
            self.fh.write(self.HEADER + "\n")

    def row(self, *cells) -> None:
        if self.fh is not None:
            self.fh.write(",".join(str(c) for c in cells) + "\n")

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()
            self.fh = None


def _dot_snapshot_path(base: str, step: int) -> str:
    stem, ext = os.path.splitext(base)
    return f"{stem}-{step:06d}{ext or '.dot'}"


def _print_counts(counts: Counter) -> None:
    keys = ["beta", "sigma", "eps", "epsR"]
    parts = [f"{k}={counts.get(k, 0)}" for k in keys if k in counts or k != "epsR"]
    print(" ".join(parts))


# -- run -------------------------------------------------------------------


def _load_term(args):
    try:
        with open(args.file, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as exc:
        print(f"cannot read {args.file}: {exc}", file=sys.stderr)
        return None
    try:
        t = parse(src, Strategy(args.strategy))
    except ParseError as exc:
        print(f"parse error in {args.file}: {exc}", file=sys.stderr)
        return None
    fv = free_vars(t)
    if fv:
        names = ", ".join(sorted(fv))
        print(f"term is open (free: {names}); closed terms only", file=sys.stderr)
        return None
    return t


def _run_oracle(t, args, trace: _TraceWriter) -> int:
    report = evaluate(t, fuel=args.fuel, keep_steps=trace.fh is not None)
    for i, step in enumerate(report.steps, start=1):
        trace.entry({"step": i, "kind": "rule", "rule": step.rule, "name": step.name, "label": step.label})
    trace.summary("oracle", report.outcome, report.counts, report.total)
    print(f"outcome: {report.outcome}")
    _print_counts(report.counts)
    if report.outcome == "answer":
        print(f"result: {render(report.answer)}")
    elif report.detail:
        print(report.detail, file=sys.stderr)
    return _OUTCOME_EXIT[report.outcome]


def _run_rewrites_first(t, args, trace: _TraceWriter, series: _SeriesWriter) -> int:
    machine = Machine(translate_term(t).g)

    def on_step(rec):
        kind = "pass" if rec.kind == "pass" else "rewrite"
        entry = {
            "step": rec.index,
            "kind": kind,
            "label": rec.label,
            "position": rec.pos,
            "direction": rec.direction,
            "flag": rec.flag,
            "compStack": [_stack_item(x) for x in machine.comp],
            "boxStack": [_stack_item(x) for x in machine.box],
        }
        if kind == "rewrite":
            entry["graphDelta"] = rec.graph_delta
        trace.entry(entry)
        series.row(
            rec.index, kind, rec.label, rec.weight, rec.s_depth, rec.b_depth,
            rec.graph_size, 3 + rec.s_depth + rec.b_depth,
        )
        if args.dot_every and args.dot_final and rec.index % args.dot_every == 0:
            path = _dot_snapshot_path(args.dot_final, rec.index)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(to_dot(machine.g, token_link=machine.pos))

    report = machine.run(fuel=args.fuel, on_step=on_step)
    trace.summary("rewrites-first", report.outcome, report.counts, report.steps)
    if args.dot_final:
        with open(args.dot_final, "w", encoding="utf-8") as fh:
            fh.write(to_dot(machine.g, token_link=machine.pos))
    print(f"outcome: {report.outcome}")
    _print_counts(report.counts)
    print(f"weighted cost: {report.weighted_cost}  max graph: {report.max_graph_size}  max token: {report.max_token_cells}")
    if report.outcome == "final":
        print(f"result: {render(readback(machine.g))}")
    elif report.detail:
        print(report.detail, file=sys.stderr)
    return _OUTCOME_EXIT[report.outcome]


def _run_baseline(t, args, trace: _TraceWriter, series: _SeriesWriter) -> int:
    tag = "cbn" if args.machine == "passes-only" else "jump"
    cls = SignatureMachine if args.machine == "passes-only" else JumpMachine
    g = translate_term(t).g
    walker = cls(g)

    def on_step():
        copies, _ = walker.token_cells()
        record = {
            "step": walker.steps,
            "kind": "pass",
            "label": "eps",
            "machine": tag,
            "position": walker.pos,
            "direction": walker.direction,
            "compStack": [_stack_item(x) for x in walker.comp],
            "boxStack": [_stack_item(x) for x in walker.box],
        }
        if isinstance(walker, SignatureMachine):
            record["levelStack"] = [_stack_item(x) for x in walker.lvl]
        trace.entry(record)
        series.row(
            walker.steps, "pass", "eps", 1, len(walker.comp), len(walker.box),
            g.size(), copies,
        )

    report = walker.run(fuel=args.fuel, on_step=on_step)
    trace.summary(tag, report.outcome, {"eps": report.steps}, report.steps)
    if args.dot_final:
        with open(args.dot_final, "w", encoding="utf-8") as fh:
            fh.write(to_dot(g, token_link=walker.pos))
    print(f"outcome: {report.outcome}")
    print(f"eps={report.steps}")
    print(f"max token: {report.max_token_cells}")
    if report.outcome == "final":
        print(f"value at {report.final_pos}: {final_value_code(g, report)}")
    elif report.detail:
        print(report.detail, file=sys.stderr)
    return _OUTCOME_EXIT[report.outcome]


def cmd_run(args) -> int:
    if args.machine in ("passes-only", "jumping") and args.strategy != "need":
        print(
            f"machine {args.machine} interprets the call-by-need translation only; "
            f"--strategy {args.strategy} is unsupported",
            file=sys.stderr,
        )
        return EXIT_USAGE
    t = _load_term(args)
    if t is None:
        return EXIT_USAGE
    trace = _TraceWriter(args.trace)
    series = _SeriesWriter(args.csv)
    try:
        if args.machine == "oracle":
            return _run_oracle(t, args, trace)
        if args.machine == "rewrites-first":
            return _run_rewrites_first(t, args, trace, series)
        return _run_baseline(t, args, trace, series)
    except (BaselineStuck,) as exc:
        print(f"stuck: {exc}", file=sys.stderr)
        return EXIT_STUCK
    finally:
        trace.close()
        series.close()


# -- compare ---------------------------------------------------------------


def cmd_compare(args) -> int:
    t = _load_term(args)
    if t is None:
        return EXIT_USAGE
    report = cosimulate(
        t,
        fuel=args.fuel,
        deep_every=args.deep_every,
        corrupt_at=args.corrupt_at,
    )
    if not report.ok:
        if report.violations == ["evaluator ran out of fuel"]:
            print(
                f"divergent within fuel {args.fuel}: evaluator {report.oracle_steps} "
                f"steps, machine {report.machine_steps}, lockstep held"
            )
            return EXIT_FUEL
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        if "final graph differs from translated answer" in report.violations:
            return EXIT_MISMATCH
        return EXIT_LOCKSTEP
    if not isomorphic(report.machine_graph, translate_term(report.answer).g):
        print(
            "final graph is not isomorphic to the translated oracle answer",
            file=sys.stderr,
        )
        return EXIT_MISMATCH
    got = readback(report.machine_graph)
    if not alpha_eq(got, canonical_answer(report.answer)):
        print(
            f"readback {render(got)} is not alpha-equivalent to "
            f"oracle answer {render(report.answer)}",
            file=sys.stderr,
        )
        return EXIT_MISMATCH
    print(
        f"lockstep ok: evaluator {report.oracle_steps} steps, machine "
        f"{report.machine_steps} transitions, {report.deep_checks} deep checks"
    )
    _print_counts(report.counts)
    print(f"result: {render(got)}")
    return EXIT_OK


# -- bench -----------------------------------------------------------------


def cmd_bench(args) -> int:
    families = args.families.split(",")
    for fam in families:
        if fam not in FAMILIES:
            known = ", ".join(sorted(FAMILIES))
            print(f"unknown family {fam!r} (known: {known})", file=sys.stderr)
            return EXIT_USAGE
    strategies = args.strategies.split(",")
    for s in strategies:
        if s not in STRATEGIES:
            print(f"unknown strategy {s!r}", file=sys.stderr)
            return EXIT_USAGE
    if args.kmin < 1 or args.kmax < args.kmin:
        print("need 1 <= kmin <= kmax", file=sys.stderr)
        return EXIT_USAGE
    rows = bench_rows(families, range(args.kmin, args.kmax + 1), strategies, fuel=args.fuel)
    print(format_table(rows))
    if args.csv:
        write_csv(rows, args.csv)
    failed = 0
    for check in ratio_checks(rows):
        state = "ok" if check.ok else "FAIL"
        failed += 0 if check.ok else 1
        print(
            f"ratio {state}: {check.family} [{check.strategy}] {check.name} "
            f"slope {check.slope:+.4f} (limit {check.slope_limit:.4f})"
        )
    if failed:
        print(f"{failed} ratio checks failed", file=sys.stderr)
        return EXIT_STUCK
    return EXIT_OK


# -- gen -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.max_size < 3:
        print("max size must be at least 3", file=sys.stderr)
        return EXIT_USAGE
    if args.count < 1:
        print("count must be positive", file=sys.stderr)
        return EXIT_USAGE
    strategy = Strategy(args.strategy)
    terms = generate(args.count, seed=args.seed, max_size=args.max_size, halt_fuel=None)
    os.makedirs(args.out, exist_ok=True)
    names = []
    for i, t in enumerate(terms):
        name = f"term-{i:04d}.lam"
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(render(t) + "\n")
        names.append(name)
    manifest = {
        "count": args.count,
        "files": names,
        "maxSize": args.max_size,
        "seed": args.seed,
        "strategy": strategy.value,
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    sizes = [size(t) for t in terms]
    print(f"wrote {len(names)} terms to {args.out} (sizes {min(sizes)}..{max(sizes)})")
    return EXIT_OK


# -- replay ----------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot replay {args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summaries = [e for e in lines if e.get("summary")]
    steps = [e for e in lines if not e.get("summary")]
    if len(summaries) != 1:
        print(f"trace needs exactly one summary record, found {len(summaries)}", file=sys.stderr)
        return EXIT_USAGE
    summary = summaries[0]
    counts: Counter = Counter()
    for e in steps:
        counts[e["label"]] += 1
        if e.get("kind") == "rewrite" and e["label"] == "eps":
            counts["epsR"] += 1
    recorded = summary["counts"]
    mismatches = []
    for key, want in recorded.items():
        if counts.get(key, 0) != want:
            mismatches.append(f"{key}: recorded {want}, replayed {counts.get(key, 0)}")
    if len(steps) != summary["steps"]:
        mismatches.append(f"steps: recorded {summary['steps']}, replayed {len(steps)}")
    if mismatches:
        for m in mismatches:
            print(f"mismatch: {m}", file=sys.stderr)
        return EXIT_MISMATCH
    shown = " ".join(f"{k}={v}" for k, v in sorted(recorded.items()))
    print(f"replay ok: machine={summary['machine']} outcome={summary['outcome']} {shown}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="tokenmachine", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_machine=True):
        p.add_argument("--strategy", choices=STRATEGIES, default="need")
        if with_machine:
            p.add_argument("--machine", choices=MACHINES, default="rewrites-first")
        p.add_argument("--fuel", type=int, default=10**7)

    p_run = sub.add_parser("run", help="evaluate one term file")
    p_run.add_argument("file")
    common(p_run)
    p_run.add_argument("--trace", metavar="OUT.jsonl", help="write a JSONL transition trace")
    p_run.add_argument("--dot-final", metavar="OUT.dot", help="write the final graph in DOT form")
    p_run.add_argument(
        "--dot-every", type=int, default=0, metavar="N",
        help="with --dot-final, also snapshot the graph every N transitions",
    )
    p_run.add_argument("--csv", metavar="OUT.csv", help="write a per-step size series")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="lockstep evaluator-vs-machine check")
    p_cmp.add_argument("file")
    common(p_cmp, with_machine=False)
    p_cmp.add_argument(
        "--deep-every", type=int, default=0, metavar="N",
        help="translate the evaluator state and check graph isomorphism every N steps",
    )
    p_cmp.add_argument(
        "--corrupt-at", type=int, default=None, metavar="N",
        help="inject a stack fault before machine transition N (fault-detection demo)",
    )
    p_cmp.set_defaults(fn=cmd_compare)

    p_bench = sub.add_parser("bench", help="cost table over the scaling families")
    p_bench.add_argument("--families", default=",".join(sorted(FAMILIES)))
    p_bench.add_argument("--strategies", default=",".join(STRATEGIES))
    p_bench.add_argument("--kmin", type=int, default=1)
    p_bench.add_argument(
        "--kmax", type=int, default=10,
        help="largest family parameter; ratio fits are calibrated for the "
        "default range (short windows sit on the saturation transient)",
    )
    p_bench.add_argument("--fuel", type=int, default=10**7)
    p_bench.add_argument("--csv", metavar="OUT.csv")
    p_bench.set_defaults(fn=cmd_bench)

    p_gen = sub.add_parser("gen", help="generate a random closed-term corpus")
    p_gen.add_argument("--out", default="corpus")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--count", type=int, default=100)
    p_gen.add_argument("--max-size", type=int, default=50)
    p_gen.add_argument("--strategy", choices=STRATEGIES, default="need")
    p_gen.set_defaults(fn=cmd_gen)

    p_rep = sub.add_parser("replay", help="re-check counter totals from a trace")
    p_rep.add_argument("file")
    p_rep.set_defaults(fn=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
