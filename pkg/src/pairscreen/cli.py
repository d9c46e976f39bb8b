"""Command-line front end.

Two subcommands:

* ``pairscreen analyze`` runs the two-stage procedure on CSV inputs and
  writes a JSON report plus a rejected-pairs CSV.
* ``pairscreen simulate`` runs the seeded replicate harness and writes a
  metrics CSV (per-replicate rows followed by aggregate mean/SE rows).

Every option can also be supplied through ``--config FILE`` (a flat JSON
object keyed by the long option names with dashes as underscores);
explicit command-line flags override config-file values.  Exit status is 0
exactly when the requested outputs were fully written; failures print
``error CODE: message`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .csvio import dominant_encode, format_number, load_csv_matrix
from .errors import InvalidConfig, PairscreenError
from .glm import family_from_name
from .pipeline import Dataset, run_two_stage
from .report import write_report
from .simulate import SimConfig, aggregate_rows, run_replicates

__all__ = ["main"]

_METRICS_COLUMNS = [
    "alpha1",
    "b",
    "rep",
    "fdp",
    "power",
    "omega",
    "p1",
    "t_hat",
    "rejections",
    "seed",
    "error",
    "fdp_se",
    "power_se",
    "power_reps",
    "failed_reps",
]


def _float_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in str(text).split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairscreen",
        description="Two-stage pairwise-interaction testing with FDR control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the two-stage procedure on CSV data")
    pa.add_argument("--config", type=str, help="JSON config file; flags override it")
    pa.add_argument("--x", dest="x", type=str, help="covariate matrix CSV (header row)")
    pa.add_argument("--y", dest="y", type=str, help="response CSV (single column)")
    pa.add_argument("--adjust", type=str, help="optional adjustment-covariate CSV")
    pa.add_argument("--family", choices=["gaussian", "logistic"], help="working family")
    pa.add_argument("--alpha1", type=float, help="stage-1 rate (alpha = sqrt(alpha1 log p))")
    pa.add_argument("--eta", type=float, help="target FDR level in (0, 1)")
    pa.add_argument("--dominant", action="store_true", default=None,
                    help="recode covariates {0,1,2} -> {0,1} (carrier indicator)")
    pa.add_argument("--strict-cutoff", action="store_true", default=None,
                    help="reject with |T| > t_hat instead of >=")
    pa.add_argument("--adjust-in-stage1", action="store_true", default=None,
                    help="include adjustment covariates in stage-1 designs too")
    pa.add_argument("--workers", type=int, help="parallel workers for the pair loop")
    pa.add_argument("--out", type=str, help="output JSON report path")

    ps = sub.add_parser("simulate", help="run the seeded replicate harness")
    ps.add_argument("--config", type=str, help="JSON config file; flags override it")
    ps.add_argument("--family", choices=["gaussian", "logistic"], help="generating family")
    ps.add_argument("--n", type=int, help="sample size")
    ps.add_argument("--p", type=int, help="number of variables")
    ps.add_argument("--b", type=_float_list, help="signal sizes, comma separated")
    ps.add_argument("--alpha1", type=_float_list,
                    help="stage-1 rates, comma separated (0 = BH baseline)")
    ps.add_argument("--eta", type=float, help="target FDR level in (0, 1)")
    ps.add_argument("--reps", type=int, help="replicates per (alpha1, b) cell")
    ps.add_argument("--seed", type=int, help="base seed; replicate r uses seed + r")
    ps.add_argument("--misspecified", action="store_true", default=None,
                    help="attach misspecification terms to active pairs")
    ps.add_argument("--cov", choices=["identity", "ar1"], help="covariate covariance")
    ps.add_argument("--beta0", type=float, help="intercept (default -1 gaussian, -2 logistic)")
    ps.add_argument("--active-limit", type=int, help="candidate-set size for active mains")
    ps.add_argument("--workers", type=int, help="parallel workers over replicates")
    ps.add_argument("--out", type=str, help="output metrics CSV path")
    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the JSON config file, if one was given."""
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config file {path}: {exc}") from None
    if not isinstance(values, dict):
        raise InvalidConfig(f"config file {path} must hold a JSON object")
    for key, value in values.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise InvalidConfig(f"config file {path}: unknown option {key!r}")
        if getattr(args, dest) is None:
            if dest in ("b", "alpha1") and args.command == "simulate":
                value = [float(v) for v in value] if isinstance(value, list) else _float_list(value)
            setattr(args, dest, value)
    return args


def _require(args: argparse.Namespace, names: list[str]) -> None:
    missing = [name for name in names if getattr(args, name) is None]
    if missing:
        opts = ", ".join("--" + name.replace("_", "-") for name in missing)
        raise InvalidConfig(f"missing required options: {opts}")


def _cmd_analyze(args: argparse.Namespace) -> int:
    _require(args, ["x", "y", "family", "alpha1", "eta", "out"])
    x, labels = load_csv_matrix(args.x)
    y, _ = load_csv_matrix(args.y)
    if y.shape[1] != 1:
        raise InvalidConfig(f"response file {args.y} must have exactly one column")
    adjust = None
    if args.adjust:
        adjust, _ = load_csv_matrix(args.adjust)
    if args.dominant:
        x = dominant_encode(x)
    data = Dataset(
        x=x,
        y=y[:, 0],
        family=family_from_name(args.family),
        adjust=adjust,
        labels=labels,
    )
    report = run_two_stage(
        data,
        alpha1=args.alpha1,
        eta=args.eta,
        strict_cutoff=bool(args.strict_cutoff),
        adjust_in_stage1=bool(args.adjust_in_stage1),
        workers=args.workers or 1,
    )
    write_report(report, data, args.out)
    return 0


def _metric_cell(value) -> str:
    return "" if value is None else format_number(value)


def _cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, ["family", "n", "p", "b", "alpha1", "eta", "reps", "seed", "out"])
    out_rows: list[list[str]] = []
    aggregates: list[list[str]] = []
    for b in args.b:
        config = SimConfig(
            n=args.n,
            p=args.p,
            family=args.family,
            b=b,
            seed=args.seed,
            misspecified=bool(args.misspecified),
            cov_kind=args.cov or "identity",
            beta0=args.beta0,
            active_limit=args.active_limit,
        )
        rows = run_replicates(config, args.alpha1, args.eta, args.reps, workers=args.workers or 1)
        for row in rows:
            m = row.metrics
            out_rows.append(
                [
                    format_number(row.alpha1),
                    format_number(b),
                    str(row.rep),
                    _metric_cell(m.fdp if m else None),
                    _metric_cell(m.power if m else None),
                    _metric_cell(m.omega if m else None),
                    _metric_cell(m.p1 if m else None),
                    _metric_cell(m.t_hat if m else None),
                    _metric_cell(m.rejections if m else None),
                    str(row.seed),
                    row.error or "",
                    "",
                    "",
                    "",
                    "",
                ]
            )
        for agg in aggregate_rows(rows):
            aggregates.append(
                [
                    format_number(agg.alpha1),
                    format_number(b),
                    "mean",
                    _metric_cell(agg.fdp_mean),
                    _metric_cell(agg.power_mean),
                    _metric_cell(agg.omega_mean),
                    _metric_cell(agg.p1_mean),
                    _metric_cell(agg.t_hat_mean),
                    _metric_cell(agg.rejections_mean),
                    str(args.seed),
                    "",
                    _metric_cell(agg.fdp_se),
                    _metric_cell(agg.power_se),
                    str(agg.power_reps),
                    str(agg.failed),
                ]
            )
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_METRICS_COLUMNS)
        writer.writerows(out_rows)
        writer.writerows(aggregates)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        return _cmd_simulate(args)
    except FileNotFoundError as exc:
        print(f"error FILE_NOT_FOUND: {exc}", file=sys.stderr)
        return 1
    except PairscreenError as exc:
        print(f"error {exc.code}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error INVALID_CONFIG: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
