"""Command-line front end.

Subcommands: `check` (synthesize observers, compose, model-check), `graph`
(state-class graph export), `simulate` (random timed run), `oracle`
(trace-level verdicts for a pattern on a trace file) and `xcheck` (simulate
many runs and confront instrumented replay with the trace oracles).

Exit codes: 0 all pass / agreement, 1 some verdict failed or mismatched,
2 input or validation error, 3 exploration budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import classgraph as cg
from .classgraph import ClassBudgetExceeded
from .expr import format_rational
from .ltl import check, cycle_time_lower_bound, find_decisive_extension, witness_to_trace
from .model import ExplorationError, ModelError, load_tts
from .observers import compose, replay_instrumented, synthesize
from .oracle import Verdict, cross_check, fott_holds
from .patterns import (
    PatternError,
    format_pattern,
    parse_pattern,
    parse_pattern_file,
    pattern_constants,
    validate_pattern,
)
from .traces import DelayPolicy, TraceError, parse_trace, serialize_trace, simulate

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _load_model(path: str):
    try:
        model = load_tts(path)
    except (OSError, ModelError) as exc:
        raise _InputError(f"cannot load model {path}: {exc}")
    return model


def _load_patterns(model, path: str) -> list:
    try:
        patterns = parse_pattern_file(Path(path).read_text(encoding="utf-8"))
    except (OSError, PatternError) as exc:
        raise _InputError(f"cannot load patterns {path}: {exc}")
    for p in patterns:
        diags = validate_pattern(p, model)
        if diags:
            raise _InputError(
                f"invalid pattern {format_pattern(p)!r}: "
                + "; ".join(str(d) for d in diags))
    return patterns


class _InputError(Exception):
    pass


def _emit(args, payload: dict, text_lines: list) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    else:
        for line in text_lines:
            print(line)


# ---------------------------------------------------------------------------
# check

def _check_one(model, pattern, args, index: int = 0):
    t0 = time.perf_counter()
    spec = synthesize(pattern)
    inst = compose(model, spec)
    graph = cg.build_graph(inst.model, args.max_classes)
    result = check(graph, inst.formula)
    entry = {
        "pattern": format_pattern(pattern),
        "formula": str(inst.formula),
        "result": result.verdict,
        "states_explored": result.states_explored,
        "graph_nodes": graph.node_count,
        "graph_edges": graph.edge_count,
    }
    if args.timings:
        # wall-clock timing is opt-in: default reports stay byte-identical
        entry["time_ms"] = round((time.perf_counter() - t0) * 1000, 1)
    if result.counterexample is not None and result.counterexample.cycle:
        lb = cycle_time_lower_bound(inst.model, result.counterexample)
        if lb is not None:
            entry["cycle_time_lower_bound"] = format_rational(lb)
    trace_file = None
    if not result.passed and args.out:
        tr = find_decisive_extension(
            graph, inst.model, result.counterexample,
            lambda t: fott_holds(pattern, t).value is Verdict.FAILS)
        if tr is None:
            tr = witness_to_trace(graph, inst.model, result.counterexample)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        trace_file = outdir / f"counterexample_{index:03d}.trace"
        trace_file.write_text(serialize_trace(tr), encoding="utf-8")
        entry["counterexample_trace_file"] = str(trace_file)
    return entry


def cmd_check(args) -> int:
    model = _load_model(args.model)
    patterns = _load_patterns(model, args.patterns)
    if not patterns:
        _emit(args, {"model": args.model, "verdicts": []}, ["no patterns; vacuously ok"])
        return EXIT_OK
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            entries = list(pool.map(
                lambda pair: _check_one(model, pair[1], args, pair[0]),
                enumerate(patterns)))
    else:
        entries = [_check_one(model, p, args, i) for i, p in enumerate(patterns)]
    lines = []
    for e in entries:
        lines.append(f"[{e['result']:>4}] {e['pattern']}"
                     f"  ({e['graph_nodes']} classes)")
        if "counterexample_trace_file" in e:
            lines.append(f"       counterexample: {e['counterexample_trace_file']}")
    _emit(args, {"model": args.model, "verdicts": entries}, lines)
    return EXIT_OK if all(e["result"] == "pass" for e in entries) else EXIT_FAIL


# ---------------------------------------------------------------------------
# graph

def cmd_graph(args) -> int:
    model = _load_model(args.model)
    graph = cg.build_graph(model, args.max_classes)
    ksg = cg.export_ksg(graph)
    payload = {"model": args.model, "nodes": graph.node_count,
               "edges": graph.edge_count, "deadlocks": sorted(graph.deadlocks())}
    lines = [f"{graph.node_count} classes, {graph.edge_count} edges, "
             f"{len(graph.deadlocks())} deadlock(s)"]
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.model).stem
        (outdir / f"{stem}.ksg").write_text(ksg, encoding="utf-8")
        (outdir / f"{stem}.dot").write_text(cg.export_dot(graph), encoding="utf-8")
        payload["ksg"] = str(outdir / f"{stem}.ksg")
        lines.append(f"wrote {outdir / (stem + '.ksg')} and .dot")
    _emit(args, payload, lines)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    trace = simulate(model, Fraction(args.horizon), args.seed,
                     DelayPolicy(args.denominator))
    text = serialize_trace(trace)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / f"{Path(args.model).stem}_{args.seed}.trace"
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path} ({len(trace.events)} events"
              f"{', deadlocked' if trace.deadlocked else ''})")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle

def cmd_oracle(args) -> int:
    try:
        pattern = parse_pattern(args.pattern)
    except PatternError as exc:
        raise _InputError(str(exc))
    try:
        trace = parse_trace(Path(args.trace).read_text(encoding="utf-8"))
    except (OSError, TraceError) as exc:
        raise _InputError(f"cannot load trace {args.trace}: {exc}")
    report = cross_check(pattern, trace)
    payload = {
        "pattern": report.pattern,
        "fott": report.fott.value.value,
        "fott_witness": report.fott.witness,
        "mtl": report.mtl.value.value,
        "agree": not report.disagree,
    }
    lines = [f"fott: {report.fott.value.value}"
             + (f"  ({report.fott.witness})" if report.fott.witness else ""),
             f"mtl:  {report.mtl.value.value}",
             f"agreement: {'yes' if not report.disagree else 'NO'}"]
    _emit(args, payload, lines)
    if report.disagree:
        return EXIT_FAIL
    return EXIT_OK if report.fott.value is not Verdict.FAILS else EXIT_FAIL


# ---------------------------------------------------------------------------
# xcheck

def run_xcheck(model, pattern, runs: int, base_seed: int, horizon=None,
               out=None) -> dict:
    """Simulate runs, replay through the instrumented model, compare with the
    decomposition oracle on every run where the oracle is decisive."""
    inst = compose(model, synthesize(pattern))
    consts = [c for c in pattern_constants(pattern) if c is not None]
    if horizon is None:
        horizon = 3 * max([Fraction(1)] + consts)
    agreements = 0
    skipped = 0
    mismatches = []
    for i in range(runs):
        trace = simulate(model, Fraction(horizon), base_seed + i)
        fv = fott_holds(pattern, trace)
        if fv.value is Verdict.INCONCLUSIVE:
            skipped += 1
            continue
        rv = replay_instrumented(inst, trace)
        if rv.verdict.value is fv.value:
            agreements += 1
        else:
            mismatches.append((i, trace, fv, rv))
    entry = {
        "pattern": format_pattern(pattern),
        "runs": runs,
        "horizon": format_rational(Fraction(horizon)),
        "decisive": agreements + len(mismatches),
        "inconclusive": skipped,
        "agreements": agreements,
        "mismatches": len(mismatches),
    }
    if mismatches and out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        files = []
        for (i, trace, fv, rv) in mismatches:
            path = outdir / f"mismatch_{i}.trace"
            path.write_text(serialize_trace(trace), encoding="utf-8")
            files.append({"file": str(path), "fott": fv.value.value,
                          "replay": rv.verdict.value.value})
        entry["mismatch_files"] = files
    return entry


def cmd_xcheck(args) -> int:
    model = _load_model(args.model)
    patterns = _load_patterns(model, args.patterns)
    entries = []
    for p in patterns:
        entries.append(run_xcheck(model, p, args.runs, args.seed,
                                  args.horizon and Fraction(args.horizon),
                                  args.out))
    lines = []
    for e in entries:
        lines.append(f"[{'ok' if not e['mismatches'] else 'MISMATCH':>8}] "
                     f"{e['pattern']}: {e['agreements']}/{e['decisive']} agree, "
                     f"{e['inconclusive']} inconclusive")
    _emit(args, {"model": args.model, "xcheck": entries}, lines)
    return EXIT_OK if all(e["mismatches"] == 0 for e in entries) else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ttscheck",
                                 description="real-time pattern verification "
                                             "on time Petri nets with data")
    ap.add_argument("--json", action="store_true", help="machine-readable reports")
    ap.add_argument("--out", help="directory for traces/exports")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="model-check patterns via observers")
    p.add_argument("model")
    p.add_argument("patterns")
    p.add_argument("--max-classes", type=int, default=1_000_000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in reports")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("graph", help="build and export the state-class graph")
    p.add_argument("model")
    p.add_argument("--max-classes", type=int, default=1_000_000)
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("simulate", help="produce a random timed trace")
    p.add_argument("model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", default="50")
    p.add_argument("--denominator", type=int, default=8)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("oracle", help="trace-level verdicts for one pattern")
    p.add_argument("pattern")
    p.add_argument("trace")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("xcheck", help="cross-validate observers against oracles")
    p.add_argument("model")
    p.add_argument("patterns")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", default=None)
    p.set_defaults(fn=cmd_xcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ClassBudgetExceeded as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ExplorationError as exc:
        print(f"exploration error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
