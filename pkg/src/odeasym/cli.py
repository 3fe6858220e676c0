"""Command-line front end.

    odeasym run CONFIG [--out DIR] [--jobs N] [--only ID]
    odeasym corpus [--out DIR] [--jobs N] [--only ID]
    odeasym check-expr EXPR [--at T ...]

Exit codes: 0 all scenarios ran, 1 a scenario errored, 2 bad config or
expression.  Disagreements and inconclusive verdicts are counted in the
summary but do not fail the process.  The default output directory comes
from ODEASYM_OUT when set.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .config import ConfigError, load_builtin_corpus, load_config
from .expr import EvalDomainError, ExprSyntaxError, differentiate, evaluate, parse_expr


def _default_out() -> str:
    return os.environ.get("ODEASYM_OUT", "odeasym-out")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output directory "
                   "(default: $ODEASYM_OUT or ./odeasym-out)")
    p.add_argument("--jobs", type=int, default=1,
                   help="scenario-level parallelism")
    p.add_argument("--only", default=None, help="run a single scenario id")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odeasym",
        description="Numerical lab for weighted long-run bounds of "
                    "additively forced linear ODEs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run scenarios from a config file")
    p_run.add_argument("config", help="path to a JSON scenario config")
    _add_run_options(p_run)

    p_corpus = sub.add_parser("corpus", help="run the builtin corpus")
    _add_run_options(p_corpus)

    p_expr = sub.add_parser("check-expr",
                            help="parse an expression and evaluate it")
    p_expr.add_argument("expression")
    p_expr.add_argument("--at", type=float, action="append", default=None,
                        help="evaluation points (repeatable; default 0 and 1)")
    return parser


def _execute(scenarios, args) -> int:
    from .runner import run

    out_dir = args.out or _default_out()
    try:
        manifest = run(scenarios, out_dir, jobs=max(1, args.jobs),
                       only=args.only)
    except OSError as e:
        print(f"output directory error: {e}", file=sys.stderr)
        return 1
    for entry in manifest.entries:
        if entry["status"] == "ok":
            print(f"{entry['id']}: {entry['consistency']}")
        else:
            print(f"{entry['id']}: ERROR {entry.get('error', '')}",
                  file=sys.stderr)
    c = manifest.counts
    print(f"{len(manifest.entries)} scenario(s): {c['agree']} agree, "
          f"{c['disagree']} disagree, {c['inconclusive']} inconclusive, "
          f"{c['error']} errored -> {out_dir}")
    return manifest.exit_code


def _check_expr(args) -> int:
    try:
        f = parse_expr(args.expression)
    except ExprSyntaxError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 2
    print(f"parsed: {f}")
    print(f"derivative: {differentiate(f)}")
    points = args.at if args.at else [0.0, 1.0]
    for t in points:
        try:
            print(f"value at t={t:g}: {evaluate(f, t)!r}")
        except EvalDomainError as e:
            print(f"value at t={t:g}: domain error: {e}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check-expr":
        return _check_expr(args)
    try:
        if args.command == "run":
            scenarios = load_config(args.config)
        else:
            scenarios = load_builtin_corpus()
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return _execute(scenarios, args)
    except KeyError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
