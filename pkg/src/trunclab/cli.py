"""Command-line harness: predict, run, fit, plot, oracle-check.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
(coercivity or solver), 4 oracle-check gap failure.
"""

import argparse
import os
import sys
from dataclasses import replace

from . import experiment, plotting, theory
from .fem import SolveError
from .field import CoercivityError
from .lattice import EvaluationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trunclab",
        description="Dimension-truncation convergence experiments for parametric "
        "elliptic problems: run QMC error sweeps, compare with theory, plot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    predict = sub.add_parser(
        "predict", help="print theoretical rates, constants and error bounds"
    )
    predict.add_argument("--config", metavar="PATH", help="config JSON (default: desk scale)")
    predict.add_argument(
        "--paper-scale", action="store_true", help="use the full-scale geometry"
    )
    predict.add_argument("--out", metavar="DIR", help="also write one bound CSV per theta")

    run = sub.add_parser("run", help="run the truncation sweep, one CSV per theta")
    run.add_argument("--config", metavar="PATH", help="config JSON (default: desk scale)")
    run.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
    run.add_argument("--out", metavar="DIR", default="results", help="output directory")
    run.add_argument(
        "--paper-scale",
        action="store_true",
        help="full-scale geometry (mesh_m=32, n=2^20, s_ref=2^11; runs for hours)",
    )
    run.add_argument("--workers", type=int, default=1, help="QMC worker processes")

    fit = sub.add_parser("fit", help="fit a convergence rate to a stored table")
    fit.add_argument("table", help="error-table CSV")
    fit.add_argument(
        "--s-min", type=int, metavar="INT", help="fit only rows with s >= this (default: top half)"
    )

    plot = sub.add_parser("plot", help="render tables into one log-log SVG")
    plot.add_argument("tables", nargs="+", help="error-table CSVs")
    plot.add_argument(
        "--out",
        metavar="DIR",
        default=".",
        help="output directory (writes convergence.svg) or explicit .svg path",
    )

    oracle = sub.add_parser(
        "oracle-check", help="compare QMC estimates against the tensor-quadrature oracle"
    )
    oracle.add_argument(
        "spec", nargs="?", help="scalar model spec JSON (default: built-in 6-mode model)"
    )
    oracle.add_argument("--seed", type=int, metavar="U64", default=1, help="shift seed")
    return parser


def _resolve_config(args) -> experiment.ExperimentConfig:
    if args.config:
        config = experiment.load_config(args.config)
    else:
        config = experiment.ExperimentConfig()
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = replace(config, seed=seed)
    if getattr(args, "paper_scale", False):
        config = experiment.paper_scale(config)
    return config


def _cmd_predict(args) -> int:
    config = _resolve_config(args)
    lines, tables = experiment.predict_report(config)
    for line in lines:
        print(line)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for table in tables:
            path = os.path.join(args.out, f"predict_theta{table.metadata['theta']}.csv")
            table.write(path)
            print(f"wrote {path}")
    return 0


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    for path, _ in experiment.run_experiment(config, args.out, workers=args.workers):
        print(f"wrote {path}")
    return 0


def _cmd_fit(args) -> int:
    for line in experiment.fit_report(args.table, s_min=args.s_min):
        print(line)
    return 0


def _cmd_plot(args) -> int:
    tables = [theory.ErrorTable.read(path) for path in args.tables]
    if args.out.endswith(".svg"):
        out_path = args.out
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
    else:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "convergence.svg")
    plotting.render_convergence_svg(tables, out_path)
    print(f"wrote {out_path}")
    return 0


def _cmd_oracle_check(args) -> int:
    spec = None
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = experiment.oracle_spec_from_json(fh.read())
    ok, lines = experiment.oracle_check_report(spec=spec, seed=args.seed)
    for line in lines:
        print(line)
    return 0 if ok else 4


_HANDLERS = {
    "predict": _cmd_predict,
    "run": _cmd_run,
    "fit": _cmd_fit,
    "plot": _cmd_plot,
    "oracle-check": _cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (CoercivityError, SolveError, EvaluationError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
