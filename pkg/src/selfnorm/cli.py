"""Command-line front end.

Exit status: 0 on success, 1 for invalid flags or inputs, 2 when a
computation fails on valid inputs (for example a degenerate denominator).
CSV output uses ``,`` separators, ``.`` decimals, LF line endings and
always carries a header row.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .blocks import confidence_interval, interlaced_sums, plan_blocks
from .bounds import BoundConfig, cmd_bound, fan_exp_bound, parse_intervals
from .contfrac import DEFAULT_PI_DIGITS, GRID_SIZE, cf_digits, pi_grid_point
from .engine import TABLE_THRESHOLDS, RatioTable, resolve_workers, run_cf_table, run_mc, run_mdp_sweep
from .errors import NumericError, SelfNormError, ValidationError
from .sources import MixingProfile, load_chain, psi_coefficient, source_from_spec


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(Fraction(v)) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _number(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_json(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def read_values(path: str, column: Optional[str] = None) -> List[float]:
    """Read one value per line, or one column of a headed CSV (default: last column)."""
    lines = [ln for ln in _read_text(path).splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: no data")
    try:
        float(lines[0].split(",")[0])
        headed = False
    except ValueError:
        headed = True
    try:
        if not headed:
            if column is not None:
                raise ValidationError("--column needs a CSV file with a header")
            return [float(ln) for ln in lines]
        reader = csv.DictReader(io.StringIO("\n".join(lines)))
        name = column or reader.fieldnames[-1]
        if name not in reader.fieldnames:
            raise ValidationError(f"{path}: no column {name!r}")
        return [float(rec[name]) for rec in reader]
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{path}: non-numeric value ({exc})") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_table(args) -> None:
    if args.input:
        table = RatioTable.from_csv(_read_text(args.input))
    else:
        grid = None if args.grid_size is None else range(1, args.grid_size + 1)
        table = run_cf_table(
            n=args.n, m_list=args.m, t_list=args.t, grid=grid, J=args.J, exponent=args.exponent,
            pi_digits=args.pi_digits, denominator=args.denominator, workers=args.threads,
        )
        _write_json(table.to_json(), args.json)
    _emit(table.to_csv(), args.out)


def _source(args):
    if args.chain:
        return source_from_spec({"kind": "markov", "chain_file": args.chain})
    spec = args.source
    if spec.endswith(".json"):
        path = Path(spec)
        try:
            data = json.loads(_read_text(spec))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{spec}: invalid JSON ({exc})") from None
        return source_from_spec(data, base_dir=path.parent)
    if spec == "ma":
        return source_from_spec({"kind": "ma", "order": args.order})
    return source_from_spec(spec)


def cmd_mc(args) -> None:
    if args.input:
        _emit(RatioTable.from_csv(_read_text(args.input)).to_csv(), args.out)
        return
    if args.n is None:
        raise ValidationError("--n is required")
    plan = plan_blocks(args.n, alpha=args.alpha, m=args.m)
    table = run_mc(
        _source(args), plan, args.t, replicates=args.replicates, seed=args.seed, center=args.center,
        workers=args.threads, replicate_offset=args.offset, exact_blocks=args.exact_blocks,
    )
    _write_json(table.to_json(), args.json)
    _emit(table.to_csv(), args.out)


def cmd_mdp(args) -> None:
    report = run_mdp_sweep(
        _source(args), parse_intervals(args.B), args.n_list, alpha=args.alpha, replicates=args.replicates,
        seed=args.seed, a_exponent=None if args.a_values else args.a_exponent, a_values=args.a_values,
        workers=args.threads, exact_blocks=args.exact_blocks,
    )
    _write_json(report.to_json(), args.json)
    _emit(report.to_csv(), args.out)


def cmd_psi(args) -> None:
    chain = load_chain(args.chain)
    if args.max_gap < 1:
        raise ValidationError("--max-gap must be >= 1")
    rows = [(g, psi_coefficient(chain, g)) for g in range(1, args.max_gap + 1)]
    _emit(_csv_text(("gap", "psi"), rows), args.out)


def cmd_cf(args) -> None:
    if args.x is not None:
        try:
            x = Fraction(args.x)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"--x must be a rational like 3141/10000, got {args.x!r}") from None
        label = str(x)
    else:
        if args.index is None:
            raise ValidationError("give --index or --x")
        x = pi_grid_point(args.index, args.pi_digits)
        label = str(args.index)
    cf = cf_digits(x, args.terms)
    rows = [(label, pos, a, float(a) ** args.exponent) for pos, a in enumerate(cf.digits, start=1)]
    _emit(_csv_text(("point", "position", "digit", "zeta"), rows), args.out)


def cmd_ci(args) -> None:
    values = read_values(args.input, args.column)
    n = len(values)
    plan = plan_blocks(n, alpha=args.alpha, m=args.m)
    est = confidence_interval(interlaced_sums(values, plan), args.delta)
    _emit(_csv_text(("n", "m", "k", "center", "lo", "hi", "level"),
                    [(n, plan.m, plan.k, est.center, est.lo, est.hi, est.level)]), args.out)


def cmd_bounds(args) -> None:
    if args.fan == args.cmd:
        raise ValidationError("choose exactly one of --fan or --cmd")
    if args.fan:
        if args.v is None or args.beta is None:
            raise ValidationError("--fan needs --v and --beta")
        rows = [(x, args.v, args.beta, fan_exp_bound(x, args.v, args.beta)) for x in args.x]
        _emit(_csv_text(("x", "v", "beta", "bound"), rows), args.out)
        return
    if args.n is None or args.alpha is None:
        raise ValidationError("--cmd needs --n and --alpha")
    cfg = BoundConfig(n=args.n, alpha=args.alpha, rho=args.rho, c=args.c)
    if args.psi:
        cfg = BoundConfig(n=args.n, alpha=args.alpha, rho=args.rho, c=args.c,
                          profile=MixingProfile.constant(args.psi, [cfg.plan.m]))
    rows = []
    for x in args.x:
        b = cmd_bound(x, cfg)
        rows.append((x, args.n, args.alpha, args.rho, args.c, args.psi, b.value, int(b.in_range)))
    _emit(_csv_text(("x", "n", "alpha", "rho", "c", "psi", "bound", "in_range"), rows), args.out)


# ---------------------------------------------------------------------------

def _add_common(p, seed=False):
    p.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $SELFNORM_THREADS or CPU count)")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _add_source(p):
    p.add_argument("--source", default="normal", help="normal | zero | ma | markov spec JSON file")
    p.add_argument("--chain", metavar="PATH", help="chain JSON file (Markov source)")
    p.add_argument("--order", type=int, default=1, help="moving-average order for --source ma")
    p.add_argument("--exact-blocks", action="store_true", help="draw block sums from their exact law")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selfnorm", description="Interlaced self-normalized sums: tables, Monte Carlo sweeps, mixing coefficients, continued fractions, bounds and confidence intervals.", allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("table", help="continued-fraction tail-ratio table", allow_abbrev=False)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--m", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--t", type=_float_list, default=list(TABLE_THRESHOLDS))
    p.add_argument("--J", type=int, default=300)
    p.add_argument("--exponent", type=_number, default=1 / 3)
    p.add_argument("--pi-digits", type=int, default=DEFAULT_PI_DIGITS)
    p.add_argument("--grid-size", type=int, default=None, help=f"use indices 1..N (default {GRID_SIZE})")
    p.add_argument("--denominator", choices=("centered", "raw"), default="centered")
    p.add_argument("--json", metavar="PATH", help="also write the JSON envelope")
    p.add_argument("--in", dest="input", metavar="PATH", help="re-emit a saved table CSV")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("mc", help="Monte Carlo tail ratios", allow_abbrev=False)
    _add_source(p)
    p.add_argument("--n", type=int, help="series length")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=_number, help="block length m = floor(n^alpha)")
    g.add_argument("--m", type=int, help="explicit block length")
    p.add_argument("--t", type=_float_list, default=[0.5, 1.0, 1.5], help="comma-separated thresholds")
    p.add_argument("--replicates", type=int, default=10000)
    p.add_argument("--offset", type=int, default=0, help="index of the first replicate")
    p.add_argument("--center", choices=("known", "none"), default="known",
                   help="subtract m times the source mean, or nothing")
    p.add_argument("--json", metavar="PATH", help="also write the JSON envelope")
    p.add_argument("--in", dest="input", metavar="PATH", help="re-emit a saved table CSV")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("mdp", help="moderate deviation sweep", allow_abbrev=False)
    _add_source(p)
    p.add_argument("--B", default="[1,inf)", help="union of intervals, e.g. '(-inf,-1] U [2,inf)'")
    p.add_argument("--n-list", type=_int_list, default=[1000, 10000, 100000])
    p.add_argument("--alpha", type=_number, default=0.3)
    p.add_argument("--a-exponent", type=_number, default=0.1)
    p.add_argument("--a-values", type=_float_list, default=None)
    p.add_argument("--replicates", type=int, default=100000)
    p.add_argument("--json", metavar="PATH")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_mdp)

    p = sub.add_parser("psi", help="exact psi-mixing coefficients of a chain", allow_abbrev=False)
    p.add_argument("--chain", required=True, metavar="PATH")
    p.add_argument("--max-gap", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("cf", help="continued-fraction digits of a grid point", allow_abbrev=False)
    p.add_argument("--index", type=int)
    p.add_argument("--x", help="explicit rational in (0,1) instead of a grid point")
    p.add_argument("--terms", type=int, default=30)
    p.add_argument("--exponent", type=_number, default=1 / 3)
    p.add_argument("--pi-digits", type=int, default=DEFAULT_PI_DIGITS)
    _add_common(p)
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("ci", help="confidence interval for the mean", allow_abbrev=False)
    p.add_argument("--in", dest="input", required=True, metavar="PATH",
                   help="one value per line, or a CSV with a header row")
    p.add_argument("--column", help="column to read from a headed CSV (default: last)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", type=_number, help="block length m = floor(n^alpha)")
    g.add_argument("--m", type=int, help="explicit block length")
    p.add_argument("--delta", type=_number, default=0.05, help="non-coverage level in (0, 1)")
    _add_common(p)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("bound", help="evaluate bound expressions", allow_abbrev=False)
    p.add_argument("--fan", action="store_true", help="exponential martingale inequality")
    p.add_argument("--cmd", action="store_true", help="moderate deviation relative-error bound")
    p.add_argument("--x", type=_float_list, required=True)
    p.add_argument("--v", type=_number)
    p.add_argument("--beta", type=_number)
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=_number)
    p.add_argument("--rho", type=_number, default=1.0)
    p.add_argument("--c", type=_number, default=1.0)
    p.add_argument("--psi", type=_number, default=0.0, help="psi(m) at the plan's block length")
    _add_common(p)
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "threads"):
            args.threads = resolve_workers(args.threads)
        args.func(args)
    except UsageError as exc:
        print(f"selfnorm: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"selfnorm: invalid input: {exc}", file=sys.stderr)
        return 1
    except (NumericError, SelfNormError, ArithmeticError) as exc:
        print(f"selfnorm: computation failed: {exc}", file=sys.stderr)
        return 2
    return 0
