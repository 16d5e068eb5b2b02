"""Command-line front end.

Exit codes: 0 success / reliable verdict, 3 audit finished with an unreliable
verdict, 1 usage or input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .defs import DefFormatError, MetaRecord, bundled_malik_dataset, parse_def_file
from .nullsim import SimConfig, run
from .pplot import pplot_points, read_pvalue_csv, render, uniformity_diagnostics
from .published import ORDER_STATS
from .report import MissingFieldError, build_report, report_text, ztable_text, ztest_rows
from .stattools import DEFAULT_NS, order_stat_csv, order_stat_table

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL, EXIT_UNRELIABLE = 0, 1, 2, 3
P_REL_TOL = 0.02


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", type=Path, help="write output here instead of stdout")
    p.add_argument("--format", choices=("text", "json", "csv"), default=None)
    p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="mtmm-audit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("audit", parents=[common], help="search-space reliability audit")
    a.add_argument("input", nargs="?", type=Path, help="DEF JSON document")
    a.add_argument("--bundled", action="store_true", help="use the built-in ten-study dataset")
    a.add_argument("--source", choices=("abstract", "text", "both"), default="text")
    a.add_argument("--timestamp", help="RFC 3339 time to stamp on the report (default: now)")
    a.add_argument("--order-stats", action="store_true", help="append the expected-maximum table")

    z = sub.add_parser("ztable", parents=[common], help="z-tests with Bonferroni factors")
    z.add_argument("input", nargs="?", type=Path)
    z.add_argument("--bundled", action="store_true")

    o = sub.add_parser("orderstats", parents=[common], help="expected maximum of n standard normals")
    o.add_argument("--n", type=int, action="append", default=[], help="sample size (repeatable)")
    o.add_argument("--table5-default", action="store_true", help="use the standard 21-row n-list")
    o.add_argument("--compare", action="store_true", help="append published values and deltas")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo of null exploratory studies")
    s.add_argument("--tests", type=int, help="shortcut: one outcome and this many predictors")
    s.add_argument("--subjects", type=int, default=100)
    s.add_argument("--outcomes", type=int, default=1)
    s.add_argument("--predictors", type=int, default=1)
    s.add_argument("--covariates", type=int, default=0)
    s.add_argument("--model-cap", type=int, default=None,
                   help="covariate subsets examined (default: all of them)")
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--duplicate-predictors", action="store_true")
    s.add_argument("--full", action="store_true", help="include per-replication arrays in JSON")
    s.add_argument("--min-p-csv", type=Path, help="also write per-replication min p as CSV")
    s.add_argument("--workers", type=int, default=1)

    pp = sub.add_parser("pplot", parents=[common], help="p-value plot from a CSV of p-values")
    pp.add_argument("input", type=Path)
    pp.add_argument("--svg", dest="plot_format", action="store_const", const="svg")
    pp.add_argument("--csv", dest="plot_format", action="store_const", const="csv")
    return parser


def _emit(text: str | bytes, out: Optional[Path]) -> None:
    data = text.encode() if isinstance(text, str) else text
    if out is None:
        buf = getattr(sys.stdout, "buffer", None)
        if buf is None:  # e.g. a redirected text stream
            sys.stdout.write(data.decode())
        else:
            buf.write(data)
        sys.stdout.flush()
    else:
        out.write_bytes(data)


def _load_meta(args) -> MetaRecord:
    if args.bundled:
        if args.input is not None:
            raise UsageError("give either an input file or --bundled, not both")
        return bundled_malik_dataset()
    if args.input is None:
        raise UsageError("an input file or --bundled is required")
    try:
        data = args.input.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    return parse_def_file(data)


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def cmd_audit(args) -> int:
    meta = _load_meta(args)
    fmt = args.format or "text"
    if fmt == "csv":
        raise UsageError("audit supports --format text or json")
    now = None
    if args.timestamp:
        try:
            now = datetime.fromisoformat(args.timestamp.replace("Z", "+00:00"))
        except ValueError:
            raise UsageError(f"bad --timestamp {args.timestamp!r}") from None
        if now.tzinfo is None:
            raise UsageError("--timestamp needs a UTC offset")
    sources = ("abstract", "text") if args.source == "both" else (args.source,)
    rows = order_stat_table(DEFAULT_NS) if args.order_stats else None
    rep = build_report(meta, sources, now=now, order_stats=rows)
    if fmt == "json":
        _emit(rep.to_json(), args.out)
    else:
        text = report_text(rep)
        if args.out is None:
            text = text.replace("-> UNRELIABLE", "-> " + _color("UNRELIABLE", "31;1"))
        _emit(text, args.out)
    return EXIT_UNRELIABLE if rep.meta_unreliable else EXIT_OK


def cmd_ztable(args) -> int:
    meta = _load_meta(args)
    rows = ztest_rows(meta)
    fmt = args.format or "text"
    if fmt == "json":
        n_sig = sum(r.adj_p < 0.05 for r in rows)
        doc = {"rows": [vars(r) for r in rows], "n_adj_p_below_0_05": n_sig}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    elif fmt == "csv":
        lines = ["row,rr,cl_low,cl_high,beta,beta_se,z,p_one_sided,adj_factor,adj_p"]
        lines += [f"{r.row},{r.rr:g},{r.cl_low:g},{r.cl_high:g},{r.beta:.3f},{r.beta_se:.3f},"
                  f"{r.z:.3f},{r.p_one_sided:.4g},{r.adj_factor},{r.adj_p:.4g}" for r in rows]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(ztable_text(rows), args.out)
    return EXIT_OK


def _p_flag(computed: float, printed: float) -> str:
    """'mismatch' when a printed p differs from 2 * (1 - Phi(E)) by more than 2%."""
    return "ok" if abs(computed - printed) <= P_REL_TOL * printed else "mismatch"


def cmd_orderstats(args) -> int:
    ns = list(args.n)
    if args.table5_default:
        ns += [n for n in DEFAULT_NS if n not in ns]
    if not ns:
        raise UsageError("give --n (repeatable) or --table5-default")
    bad = [n for n in ns if n < 1]
    if bad:
        raise UsageError(f"n must be >= 1, got {bad[0]}")
    rows = order_stat_table(ns)
    if args.format == "json":
        doc = [{"n": r.n, "expected_max": r.expected_max, "p_two_sided": r.p_two_sided} for r in rows]
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
        return EXIT_OK
    csv = order_stat_csv(rows)
    if args.compare:
        printed = {ref.n: ref for ref in ORDER_STATS}
        lines = csv.splitlines()
        lines[0] += ",printed_expected_max,printed_p,delta_expected_max,delta_p,p_flag"
        for i, r in enumerate(rows, start=1):
            ref = printed.get(r.n)
            if ref is None:
                lines[i] += ",,,,,"
            else:
                lines[i] += (f",{ref.expected_max:.5f},{ref.p_value:.5f},"
                             f"{r.expected_max - ref.expected_max:.6f},{r.p_two_sided - ref.p_value:.5f},"
                             f"{_p_flag(r.p_two_sided, ref.p_value)}")
        csv = "\n".join(lines) + "\n"
    _emit(csv, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    outcomes, predictors = args.outcomes, args.predictors
    if args.tests is not None:
        outcomes, predictors = 1, args.tests
    cap = args.model_cap if args.model_cap is not None else 2**args.covariates
    try:
        cfg = SimConfig(n_subjects=args.subjects, n_outcomes=outcomes, n_predictors=predictors,
                        n_covariates=args.covariates, model_cap=cap, replications=args.reps,
                        alpha=args.alpha, seed=args.seed,
                        duplicate_predictors=args.duplicate_predictors)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = run(cfg, workers=args.workers)
    if args.min_p_csv is not None:
        args.min_p_csv.write_text(res.min_p_csv())
    if args.format == "json":
        _emit(res.to_json(full=args.full), args.out)
        return EXIT_OK
    d = res.to_dict()
    lines = [
        f"replications        {cfg.replications}",
        f"subjects            {cfg.n_subjects}",
        f"tests/replication   {cfg.n_tests} ({cfg.n_outcomes} outcomes x {cfg.n_predictors} predictors"
        f" x {min(cfg.model_cap, 2**cfg.n_covariates)} covariate subsets)",
        f"seed                {cfg.seed}",
        f"FWER (min p < {cfg.alpha:g})  {d['fwer_hat']:.4f} +/- {d['fwer_se']:.4f}",
        f"mean max z          {d['mean_max_z']:.4f}",
        f"winning beta        {d['selected_beta_mean']:.5f} +/- {d['selected_beta_se']:.5f}",
        f"expected FWER for {cfg.n_tests} independent tests at alpha {cfg.alpha:g}: "
        f"{d['expected_fwer_independent']:.3f}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_pplot(args) -> int:
    try:
        text = args.input.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    try:
        series = pplot_points(read_pvalue_csv(text))
    except ValueError as exc:
        raise UsageError(f"{args.input}: {exc}") from None
    fmt = args.plot_format or ("csv" if args.format == "csv" else "svg")
    diag = uniformity_diagnostics(series)
    near = "unavailable" if diag.near_null is None else str(diag.near_null).lower()
    footer = f"m={series.m} ks_stat={diag.ks_stat:.6f} fitted_slope={diag.fitted_slope:.6g} near_null={near}"
    body = render(series, fmt)
    if fmt == "svg":
        body += f"<!-- {footer} -->\n".encode()
    _emit(body, args.out)
    print(footer, file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "audit": cmd_audit,
    "ztable": cmd_ztable,
    "orderstats": cmd_orderstats,
    "simulate": cmd_simulate,
    "pplot": cmd_pplot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "seed") and not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, DefFormatError, MissingFieldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
