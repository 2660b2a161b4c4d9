"""Command-line interface.

    dtac apply --program P --script S --errors F --out O [--diff] [--trace]
    dtac check --before A --after B
    dtac parse P
    dtac stdlib --list
    dtac serve [--host H] [--port N] [--snapshot-dir D]

Exit codes for apply: 0 full success, 2 step failure, 1 I/O or parse error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import Engine, EngineFailure
from .guard import check_guard, format_report
from .oracle import FixtureError
from .parser import ParseError, parse_program
from .printer import print_program
from .replay import CorpusCase, replay
from .stdlib import load_stdlib
from .tactic_parser import TacticParseError


def _read(path: str) -> str:
    return Path(path).read_text("utf-8")


def cmd_apply(args) -> int:
    try:
        program_text = _read(args.program)
        script_text = _read(args.script)
        fixture_text = _read(args.errors) if args.errors else ""
        extra = [_read(p) for p in args.library or []]
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        case = CorpusCase("cli", program_text, fixture_text, script_text)
        result = replay(case, extra_libraries=extra)
    except (ParseError, FixtureError, TacticParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except EngineFailure as e:
        print(e.report(), file=sys.stderr)
        return 2
    if args.diff:
        for step in result.steps:
            print(f"--- step {step.index}: {step.invocation}")
            print(step.diff)
    if args.trace:
        print(result.trace_summary())
    out_text = print_program(result.final)
    if args.out:
        Path(args.out).write_text(out_text, "utf-8")
    else:
        print(out_text, end="")
    return 0


def cmd_check(args) -> int:
    try:
        before = parse_program(_read(args.before))
        after = parse_program(_read(args.after))
    except (OSError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    report = check_guard(before, after)
    print(format_report(report))
    return 0 if report.ok else 1


def cmd_parse(args) -> int:
    try:
        prog = parse_program(_read(args.file))
    except (OSError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(print_program(prog), end="")
    return 0


def cmd_stdlib(args) -> int:
    lib = load_stdlib()
    if args.list:
        for d in lib.defs:
            print(f"{d.name}/{len(d.formals)}  {d.doc}")
    else:
        from .stdlib import stdlib_source
        print(stdlib_source(), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(snapshot_dir=args.snapshot_dir,
                     static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dtac",
                                     description="tactic workbench for "
                                                 "contract-annotated programs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("apply", help="replay a tactic script over a program")
    p.add_argument("--program", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--errors", help="fixture file of verifier reports")
    p.add_argument("--out", help="write the final program here")
    p.add_argument("--library", action="append",
                   help="extra .dtac library file (repeatable)")
    p.add_argument("--diff", action="store_true",
                   help="print a unified diff per step")
    p.add_argument("--trace", action="store_true",
                   help="print the trace summary")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("check", help="check a transformation against the guard")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("parse", help="parse and pretty-print a program")
    p.add_argument("file")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("stdlib", help="show the shipped tactic library")
    p.add_argument("--list", action="store_true")
    p.set_defaults(fn=cmd_stdlib)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.add_argument("--snapshot-dir", help="write a numbered snapshot per apply")
    p.add_argument("--static-dir", help="serve a built web client from here")
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
