"""Command line: ``fpverify verify <files...>``."""

from __future__ import annotations

import argparse
import sys

from . import CORPUS, __version__
from .driver import EXIT_FAILURE, Config, render, verify_paths
from .formats import DEFAULT_FP_FORMATS, FP_BY_NAME


def parse_fp_widths(text: str) -> tuple:
    """``half,single`` selects formats; a leading ``+`` adds to the defaults."""
    extend = text.startswith("+")
    names = [n.strip() for n in text.lstrip("+").split(",") if n.strip()]
    out = list(DEFAULT_FP_FORMATS) if extend else []
    for n in names:
        if n not in FP_BY_NAME:
            raise argparse.ArgumentTypeError(f"unknown format {n!r} (known: {', '.join(FP_BY_NAME)})")
        if FP_BY_NAME[n] not in out:
            out.append(FP_BY_NAME[n])
    if not out:
        raise argparse.ArgumentTypeError("no formats given")
    return tuple(out)


def parse_int_widths(text: str) -> tuple:
    try:
        widths = tuple(sorted({int(w) for w in text.split(",") if w.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad width list {text!r}") from None
    if not widths or any(not 1 <= w <= 64 for w in widths):
        raise argparse.ArgumentTypeError("integer widths must lie in 1..64")
    return widths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpverify", description=__doc__)
    p.add_argument("--version", action="version", version=f"fpverify {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="verify the transforms in .opt files")
    v.add_argument("files", nargs="*")
    v.add_argument("--corpus", action="store_true", help="also verify every bundled .opt file")
    v.add_argument("--timeout", type=float, default=300.0, help="seconds per query (default 300)")
    v.add_argument("--solver", default=None,
                   help="solver command, e.g. 'z3 -in' or 'cvc5 {file}' (env FPVERIFY_SOLVER)")
    v.add_argument("--fp-widths", type=parse_fp_widths, default=DEFAULT_FP_FORMATS,
                   help="formats to instantiate: half,single,double,fp8 or +fp8 to extend")
    v.add_argument("--int-widths", type=parse_int_widths, default=(8, 16, 32, 64))
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--brute-force", action="store_true",
                   help="cross-check every transform at fp8 against the exhaustive oracle")
    v.add_argument("--dump-smt", metavar="DIR", default=None,
                   help="write every query and solver transcript to DIR")
    v.add_argument("--jobs", type=int, default=0, help="parallel solver processes (default: CPUs)")
    v.add_argument("--memory-mb", type=int, default=4096,
                   help="address-space cap per solver process in MB, 0 for none (default 4096)")
    v.add_argument("--plain-check-sat", action="store_true",
                   help="use (check-sat) for quantified queries instead of a z3 tactic")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        files = list(args.files) + (sorted(map(str, CORPUS.glob("*.opt"))) if args.corpus else [])
        if not files:
            parser.error("no input files (give paths or --corpus)")
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which would read as "timeouts only"
        return EXIT_FAILURE if exc.code else 0
    cfg = Config(timeout=args.timeout, solver=args.solver, fp_formats=args.fp_widths,
                 int_widths=args.int_widths, jobs=args.jobs, brute_force=args.brute_force,
                 dump_smt=args.dump_smt, memory_mb=args.memory_mb or None)
    if args.plain_check_sat:
        cfg.quantified_check = None
    try:
        report = verify_paths(files, cfg)
    except OSError as exc:
        print(f"fpverify: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(render(report, args.format))
    return report.exit_code()


if __name__ == "__main__":
    raise SystemExit(main())
