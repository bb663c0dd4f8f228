"""Command-line interface.

Exit status: 0 on success, 1 on invalid arguments or data, 2 on I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import re
import sys
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import __version__
from .analysis import DEFAULT_ALPHA, WEIGHT_MODES, build_report, interval, run_methods, sensitivity
from .bounds import TABLE_ALPHAS, TABLE_NS, bounds_table, format_sig
from .calibration import verify_null_dependent, verify_null_unweighted, verify_null_weighted
from .comparators import (
    TABLE2_POWERS,
    conditional_power_curve,
    fisher_rule,
    harmonic_rule,
    liberal_harmonic_rule,
    project_power_table,
    rejection_boundary,
    standard_rules,
    stouffer_rule,
    two_trials_rule,
)
from .core import Inequality
from .data_io import StudyTable, canonical_json, load_csv, load_dataset
from .inference import p_value_curve
from .numerics import RngStream, sigma_level

DEFAULT_SEED = 20200101
DEFAULT_SIMS = 10**6


class UsageError(Exception):
    """Bad command line; reported in one line with exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message} (see --help)")


# -- argument types ----------------------------------------------------------


def parse_level(text: str) -> float:
    """Decimal (``0.000625``), fraction (``1/1600``) or sigma (``4sigma``) level."""
    s = text.strip().lower()
    m = re.fullmatch(r"([0-9.]+)\s*sigma", s)
    try:
        if m:
            value = sigma_level(float(m.group(1)))
        elif "/" in s:
            value = float(Fraction(s))
        else:
            value = float(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"cannot parse level {text!r}; use 0.000625, 1/1600 or 4sigma") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"level {text!r} must lie in (0, 1)")
    return value


def parse_ns(text: str) -> List[int]:
    """``3``, ``2..6`` or ``2,4,6``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            ns = list(range(int(a), int(b) + 1))
        else:
            ns = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse study counts {text!r}; use 3, 2..6 or 2,4") from None
    if not ns or min(ns) < 1:
        raise argparse.ArgumentTypeError("study counts must be positive")
    return ns


def parse_floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text):
    try:
        v = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "csv", "json"), default="text", help="output format (default: text)")
    common.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")

    data = _Parser(add_help=False)
    src = data.add_mutually_exclusive_group()
    src.add_argument("--input", metavar="PATH", help="study table CSV")
    src.add_argument("--embedded", metavar="NAME", help="embedded dataset (carvedilol)")
    data.add_argument(
        "--weights", choices=WEIGHT_MODES, default="none", help="weighting of the harmonic test (default: none)"
    )

    alpha = _Parser(add_help=False)
    alpha.add_argument(
        "--alpha", type=parse_level, default=DEFAULT_ALPHA, metavar="SPEC",
        help="overall one-sided level: 0.000625, 1/1600 or 4sigma (default: 0.000625)",
    )

    sim = _Parser(add_help=False)
    sim.add_argument("--n-sims", type=_positive_int, default=DEFAULT_SIMS, help=f"Monte Carlo replicates (default: {DEFAULT_SIMS})")
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default: {DEFAULT_SEED})")

    parser = _Parser(prog="hmchisq", description="Harmonic mean chi-squared test and comparators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("test", parents=[common, data, alpha], help="all combination methods on a study table")
    p.add_argument("--perturb", nargs=2, metavar=("ID", "FACTOR"), help="scale one study's p-value and compare")

    p = sub.add_parser("bounds", parents=[common], help="necessary and sufficient per-study p-value bounds")
    p.add_argument("--alpha", type=parse_level, action="append", metavar="SPEC",
                   help="overall level, repeatable (default: 1/1600, 1/31574, 1/3488556)")
    p.add_argument("--n", type=parse_ns, default=list(TABLE_NS), metavar="NS", help="study counts, e.g. 2..6 (default: 2..6)")

    p = sub.add_parser("ci", parents=[common, data], help="confidence interval by test inversion")
    p.add_argument("--gamma", type=float, default=0.95, help="confidence level (default: 0.95)")
    p.add_argument("--scale", choices=("log", "hr"), default="log", help="report on the analysis (log) or ratio (hr) scale (default: log)")
    p.add_argument("--curve", metavar="PATH", help="also write the p-value function as CSV (mu, p_two_sided, is_inequality)")
    p.add_argument("--points", type=_positive_int, default=401, help="grid points for --curve (default: 401)")

    p = sub.add_parser("power", parents=[common, sim, alpha], help="project power table and conditional power curves")
    p.add_argument("--conditional", action="store_true", help="emit conditional power curves instead of the project power table")
    p.add_argument("--powers", type=parse_floats, default=list(TABLE2_POWERS), help="per-trial powers (default: 0.7,0.8,0.9,0.95)")
    p.add_argument("--points", type=_positive_int, default=200, help="p1 grid points for --conditional (default: 200)")

    p = sub.add_parser("regions", parents=[common, alpha], help="rejection-region boundaries for two studies")
    p.add_argument("--points", type=_positive_int, default=200, help="p1 grid points (default: 200)")

    p = sub.add_parser("calibrate", parents=[common, sim], help="Monte Carlo check of the chi-squared(1) null law")
    p.add_argument("--n-studies", type=_positive_int, default=2, help="number of studies (default: 2)")
    p.add_argument("--weight-values", type=parse_floats, metavar="W1,W2,...", help="weights for the weighted statistic")
    p.add_argument("--rho", type=float, help="exchangeable correlation between z-scores")

    p = sub.add_parser("report", parents=[common, data, alpha], help="full JSON analysis bundle")
    p.add_argument("--gamma", type=float, action="append", help="confidence level, repeatable (default: 0.95 and 0.99875)")
    p.add_argument("--perturb", nargs=2, metavar=("ID", "FACTOR"), help="include a sensitivity analysis")
    return parser


# -- helpers -----------------------------------------------------------------


def _table(args) -> StudyTable:
    if args.input:
        return load_csv(args.input)
    if args.embedded:
        return load_dataset(args.embedded)
    raise UsageError(f"hmchisq {args.command}: give --input PATH or --embedded NAME")


def _pfmt(p) -> str:
    if isinstance(p, Inequality):
        return str(p)
    if p is None:
        return "-"
    return f"{p:.6g}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (v.gt if isinstance(v, Inequality) else v) for v in r])
    return buf.getvalue()


def _envelope(settings, **payload):
    doc = {"settings": settings, "version": __version__}
    doc.update({k: v for k, v in payload.items() if v is not None})
    return canonical_json(doc)


def _perturb_arg(pair):
    if pair is None:
        return None
    sid, factor = pair
    try:
        return sid, float(factor)
    except ValueError:
        raise UsageError(f"--perturb factor must be a number, got {factor!r}") from None


# -- subcommands -------------------------------------------------------------


def cmd_test(args) -> str:
    table = _table(args)
    perturb = _perturb_arg(args.perturb)
    settings = {"alpha_H": args.alpha, "weights": args.weights, "source": table.source}
    if perturb is not None:
        rows = sensitivity(table, perturb[0], perturb[1], args.weights)
        settings["perturb"] = {"study": perturb[0], "factor": perturb[1]}
        if args.format == "json":
            return _envelope(settings, results={"sensitivity": rows})
        if args.format == "csv":
            return _csv([(m, r["before"], r["after"], r["factor"]) for m, r in rows.items()], ["method", "before", "after", "factor"])
        lines = [f"study {perturb[0]}: p-value x {perturb[1]:g}", f"{'method':<20}{'before':>14}{'after':>14}{'factor':>9}"]
        for m, r in rows.items():
            f = "-" if r["factor"] is None else f"{r['factor']:.2f}"
            lines.append(f"{m:<20}{_pfmt(r['before']):>14}{_pfmt(r['after']):>14}{f:>9}")
        return "\n".join(lines) + "\n"

    results = run_methods(table, args.weights)
    if args.format == "json":
        payload = {m: {"p": r.p_overall, "statistic": r.statistic, "approved": r.decide(args.alpha)} for m, r in results.items()}
        return _envelope(settings, results=payload, dataset={"source": table.source, "sha256": table.sha256(), "n": len(table)})
    if args.format == "csv":
        return _csv([(m, r.statistic, r.p_overall, r.is_inequality, r.decide(args.alpha)) for m, r in results.items()],
                    ["method", "statistic", "p", "is_inequality", "approved"])
    lines = [f"{len(table)} studies from {table.source}; level alpha_H = {args.alpha:.6g}",
             f"{'method':<20}{'statistic':>12}{'p':>14}  decision"]
    for m, r in results.items():
        stat = "-" if r.statistic is None else f"{r.statistic:.4f}"
        lines.append(f"{m:<20}{stat:>12}{_pfmt(r.p_overall):>14}  {'approve' if r.decide(args.alpha) else 'reject'}")
    return "\n".join(lines) + "\n"


def cmd_bounds(args) -> str:
    alphas = args.alpha or list(TABLE_ALPHAS)
    rows = bounds_table(alphas, args.n)
    settings = {"alpha_H": alphas, "n": args.n}
    if args.format == "json":
        return _envelope(settings, bounds={"rows": [r.as_dict() for r in rows]})
    if args.format == "csv":
        return _csv([(r.alpha_H, r.n, r.necessary, r.sufficient) for r in rows], ["alpha_H", "n", "necessary", "sufficient"])
    lines = [f"{'alpha_H':<12}{'bound':<12}" + "".join(f"{'n=' + str(n):>10}" for n in args.n)]
    for a in alphas:
        sel = [r for r in rows if r.alpha_H == a]
        label = _level_label(a)
        lines.append(f"{label:<12}{'necessary':<12}" + "".join(f"{format_sig(r.necessary):>10}" for r in sel))
        lines.append(f"{'':<12}{'sufficient':<12}" + "".join(f"{format_sig(r.sufficient):>10}" for r in sel))
    return "\n".join(lines) + "\n"


def _level_label(a: float) -> str:
    inv = 1 / a
    if abs(inv - round(inv)) < 1e-6 * inv:
        return f"1/{round(inv)}"
    return f"{a:.4g}"


def cmd_ci(args) -> str:
    table = _table(args)
    ci = interval(table, args.gamma, args.weights, args.scale)
    if args.curve:
        studies = table.to_study_set(args.weights)
        eff, se = studies.effects, studies.ses
        reach = 4 * se.max()
        curve = p_value_curve(studies, eff.min() - reach, eff.max() + reach, args.points)
        with open(args.curve, "w", encoding="utf-8") as fh:
            fh.write(_csv(curve.rows(), ["mu", "p_two_sided", "is_inequality"]))
    settings = {"gamma": args.gamma, "weights": args.weights, "scale": args.scale, "source": table.source}
    if args.format == "json":
        return _envelope(settings, ci={"lower": ci.lower, "upper": ci.upper, "level": ci.level, "scale": ci.scale,
                                       "warnings": list(ci.warnings)})
    if args.format == "csv":
        return _csv([(ci.level, ci.lower, ci.upper, args.scale)], ["gamma", "lower", "upper", "scale"])
    out = f"{100 * args.gamma:g}% confidence interval ({args.scale} scale): {ci.lower:.4f} to {ci.upper:.4f}\n"
    for w in ci.warnings:
        out += f"warning: {w}\n"
    return out


def _two_study_rules(alpha_H):
    return [two_trials_rule(alpha_H**0.5), harmonic_rule(alpha_H), liberal_harmonic_rule(alpha_H**0.5),
            fisher_rule(alpha_H), stouffer_rule(alpha_H)]


def cmd_power(args) -> str:
    settings = {"alpha_H": args.alpha, "n_sims": args.n_sims, "seed": args.seed}
    if args.conditional:
        grid = np.linspace(0.0005, 0.2, args.points)
        rows = []
        for rule in _two_study_rules(args.alpha):
            for p1, pw in zip(grid, conditional_power_curve(rule, grid)):
                rows.append((rule.kind, float(p1), float(pw)))
        settings.pop("n_sims"), settings.pop("seed")
        if args.format == "json":
            return _envelope(settings, results={"conditional_power": [dict(zip(("method", "p1", "power"), r)) for r in rows]})
        if args.format == "csv":
            return _csv(rows, ["method", "p1", "power"])
        lines = [f"{'method':<22}{'p1':>10}{'power':>10}"]
        lines += [f"{m:<22}{p:>10.4f}{pw:>10.4f}" for m, p, pw in rows]
        return "\n".join(lines) + "\n"

    rules = standard_rules(args.alpha)
    table = project_power_table(args.powers, rules, args.n_sims, RngStream(args.seed))
    cols = [r.kind for r in rules]
    if args.format == "json":
        return _envelope(settings, results={"project_power": {f"{k:g}": v for k, v in table.items()}})
    if args.format == "csv":
        return _csv([(pw, *[row[c] for c in cols]) for pw, row in table.items()], ["trial_power", *cols])
    lines = [f"{'trial power':<13}" + "".join(f"{c:>22}" for c in cols)]
    for pw, row in table.items():
        lines.append(f"{100 * pw:<13.0f}" + "".join(f"{100 * row[c]:>22.1f}" for c in cols))
    return "\n".join(lines) + "\n"


def cmd_regions(args) -> str:
    grid = np.geomspace(1e-5, 0.5, args.points)
    rows = []
    for rule in _two_study_rules(args.alpha):
        for b in rejection_boundary(rule, grid):
            rows.append((b.method, b.p1, b.p2, b.z1, b.z2))
    settings = {"alpha_H": args.alpha}
    if args.format == "json":
        pts = [dict(zip(("method", "p1", "p2", "z1", "z2"), r)) for r in rows]
        return _envelope(settings, results={"regions": pts})
    # text output is the plot-ready CSV as well
    return _csv(rows, ["method", "p1", "p2", "z1", "z2"])


def cmd_calibrate(args) -> str:
    rng = RngStream(args.seed)
    if args.rho is not None:
        rep = verify_null_dependent(args.rho, args.n_studies, args.n_sims, rng)
    elif args.weight_values:
        rep = verify_null_weighted(args.weight_values, args.n_sims, rng)
    else:
        rep = verify_null_unweighted(args.n_studies, args.n_sims, rng)
    settings = {"n_sims": args.n_sims, "seed": args.seed, "n_studies": rep.n_studies, "weights": rep.weights, "rho": rep.rho}
    if args.format == "json":
        return _envelope(settings, results={"calibration": rep.as_dict()})
    if args.format == "csv":
        return _csv([(k, v) for k, v in rep.as_dict().items() if not isinstance(v, (dict, list))], ["key", "value"])
    lines = [
        f"n_studies={rep.n_studies} n_sims={rep.n_sims} seed={rep.seed}",
        f"KS distance to chi-squared(1): {rep.ks_distance:.5f} (threshold {rep.ks_threshold:.5f}) {'ok' if rep.passed else 'FAIL'}",
    ]
    for k, v in rep.tail_error_at.items():
        lines.append(f"tail P(X^2 >= q_{k}): relative error {v:+.4f} (MC se {rep.tail_mc_se[k]:.4f})")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> str:
    table = _table(args)
    gammas = tuple(args.gamma) if args.gamma else (0.95, 1 - 2 * DEFAULT_ALPHA)
    report = build_report(table, args.alpha, args.weights, gammas, _perturb_arg(args.perturb))
    return canonical_json(report)


COMMANDS = {
    "test": cmd_test,
    "bounds": cmd_bounds,
    "ci": cmd_ci,
    "power": cmd_power,
    "regions": cmd_regions,
    "calibrate": cmd_calibrate,
    "report": cmd_report,
}


def run(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:
            # --help and --version
            return int(exc.code or 0)
        text = COMMANDS[args.command](args)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=stderr)
        return 2
    except (ValueError, KeyError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"error: {msg}", file=stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
