"""Command-line entry point.

Subcommands: ``protect`` rewrites a module with the selected passes,
``run`` executes one in the mini-interpreter, and ``report`` compares a
protected run against its baseline under the linear overhead model.

Exit codes: 0 success, 1 usage error, 2 parse/transform error, 3 the run
trapped (the trap reason is printed to stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import PassConfig, apply_passes
from .errors import WatGuardError
from .interp import instantiate, invoke, poke_input
from .parser import parse_module
from .printer import print_module
from .report import build_overhead_report
from .rng import emit_host_glue

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TRANSFORM = 2
EXIT_TRAP = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="watguard", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    protect = sub.add_parser("protect", allow_abbrev=False,
                             help="inject protection passes into a module")
    protect.add_argument("input", metavar="in.wat")
    protect.add_argument("--pass", dest="passes", choices=("aslr", "canary", "both"))
    protect.add_argument("-ASLR", dest="pass_alias", action="store_const",
                         const="aslr", help="alias for --pass aslr")
    protect.add_argument("-canary", dest="pass_alias", action="store_const",
                         const="canary", help="alias for --pass canary")
    protect.add_argument("-canary_and_ASLR", dest="pass_alias", action="store_const",
                         const="both", help="alias for --pass both")
    protect.add_argument("--shuffle-table", action="store_true")
    protect.add_argument("--strict", action="store_true",
                         help="refuse to shuffle while uncovered call sites exist")
    protect.add_argument("--skip", action="append", default=[], metavar="NAME")
    protect.add_argument("--sp", metavar="NAME",
                         help="symbol of the stack-pointer global")
    protect.add_argument("--seed", type=int, metavar="N",
                         help="fixed transform-time seed (table shuffle)")
    protect.add_argument("--out", required=True, metavar="out.wat")
    protect.add_argument("--emit-glue", metavar="FILE")
    protect.add_argument("--report", metavar="FILE.json")

    run = sub.add_parser("run", allow_abbrev=False,
                         help="execute a module in the mini-interpreter")
    run.add_argument("input", metavar="file.wat")
    run.add_argument("--invoke", required=True, metavar="NAME")
    run.add_argument("--arg", action="append", type=int, default=[], metavar="N")
    run.add_argument("--input-addr", type=int, metavar="A")
    run.add_argument("--input-hex", metavar="BYTES")
    run.add_argument("--time", type=int, metavar="N",
                     help="fix the host clock for reproducible runs")
    run.add_argument("--count", action="store_true",
                     help="emit a JSON document with counters to stdout")

    report = sub.add_parser("report", allow_abbrev=False,
                            help="compare paired run documents")
    report.add_argument("--base", required=True, metavar="run.json")
    report.add_argument("--protected", required=True, metavar="run.json")
    report.add_argument("--stats", metavar="protect-report.json",
                        help="protect-time report used to compute the prediction")
    return parser


def _resolve_pass_selection(args) -> tuple[bool, bool]:
    selected = args.passes
    if args.pass_alias is not None:
        if selected is not None and selected != args.pass_alias:
            raise WatGuardError(
                f"conflicting pass selection: --pass {selected} vs -{args.pass_alias}"
            )
        selected = args.pass_alias
    if selected is None:
        return False, False
    return selected in ("aslr", "both"), selected in ("canary", "both")


def _cmd_protect(args) -> int:
    enable_aslr, enable_canary = _resolve_pass_selection(args)
    if not (enable_aslr or enable_canary or args.shuffle_table):
        print("error: no pass selected; use --pass or --shuffle-table",
              file=sys.stderr)
        return EXIT_USAGE

    text = Path(args.input).read_text(encoding="utf-8")
    module = parse_module(text)

    config = PassConfig(
        enable_aslr=enable_aslr,
        enable_canary=enable_canary,
        enable_table_shuffle=args.shuffle_table,
        sp_override=args.sp,
        seed_mode=args.seed,
        shuffle_strict=args.strict,
    )
    config.skip_names |= {name.lstrip("$") for name in args.skip}

    protected, stats = apply_passes(module, config)
    Path(args.out).write_text(print_module(protected), encoding="utf-8")

    if args.emit_glue:
        Path(args.emit_glue).write_text(emit_host_glue(protected), encoding="utf-8")

    if args.report:
        passes = []
        if enable_aslr:
            passes.append("aslr")
        if enable_canary:
            passes.append("canary")
        if args.shuffle_table:
            passes.append("table-shuffle")
        doc = build_overhead_report(passes, stats)
        Path(args.report).write_text(
            json.dumps(doc, indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def _cmd_run(args) -> int:
    if (args.input_addr is None) != (args.input_hex is None):
        print("error: --input-addr and --input-hex must be given together",
              file=sys.stderr)
        return EXIT_USAGE

    text = Path(args.input).read_text(encoding="utf-8")
    module = parse_module(text)
    instance = instantiate(module, time=args.time)
    if args.input_hex is not None:
        poke_input(instance, args.input_addr, bytes.fromhex(args.input_hex))

    result = invoke(instance, args.invoke, args.arg)

    if args.count:
        n_imp = instance.module.num_func_imports()
        doc = {
            "values": result.values,
            "trap": result.trap.value if result.trap else None,
            "counters": result.counters,
            "calls": {
                str(index - n_imp): count
                for index, count in sorted(result.call_counts.items())
                if index >= n_imp
            },
        }
        print(json.dumps(doc, indent=2))
    elif result.values:
        print(" ".join(str(v) for v in result.values))

    if result.trapped:
        print(f"trap: {result.trap.value}", file=sys.stderr)
        return EXIT_TRAP
    return EXIT_OK


def _cmd_report(args) -> int:
    base = json.loads(Path(args.base).read_text(encoding="utf-8"))
    protected = json.loads(Path(args.protected).read_text(encoding="utf-8"))
    if base.get("trap") or protected.get("trap"):
        print("error: overhead is undefined on trapping runs", file=sys.stderr)
        return EXIT_TRANSFORM

    measured = protected["counters"]["total"] - base["counters"]["total"]
    predicted = None
    if args.stats:
        stats_doc = json.loads(Path(args.stats).read_text(encoding="utf-8"))
        calls = {int(k): v for k, v in protected.get("calls", {}).items()}
        predicted = 0
        for position, row in enumerate(stats_doc["functions"]):
            predicted += sum(row["inserted"].values()) * calls.get(position, 0)

    doc = {
        "measured_extra": measured,
        "predicted_extra": predicted,
        "exact": (predicted == measured) if predicted is not None else None,
    }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        if args.command == "protect":
            return _cmd_protect(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_report(args)
    except WatGuardError as exc:
        span = getattr(exc, "span", None)
        location = f" at line {span.line} column {span.column}" if span else ""
        print(f"error: {exc}{location}", file=sys.stderr)
        return EXIT_TRANSFORM
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSFORM


if __name__ == "__main__":
    sys.exit(main())
