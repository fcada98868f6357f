"""Command-line entry point: ``gcsnmf run|cost|demo``."""

import argparse
import logging
import math
import sys

from .bench import (
    ExperimentConfig,
    cost_report,
    default_grid,
    load_config,
    resolve_output_dir,
    run_experiment,
    standard_grid,
    with_overrides,
    write_outputs,
)
from .compress import CompressorSpec
from .nmf import Solver

logger = logging.getLogger("gcsnmf")


def _max_iter(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("max-iter must be >= 1 or 'inf'")
    return value


def _strategy(text):
    try:
        return CompressorSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _solver(text):
    try:
        return Solver(text.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown solver {text!r}; expected 'as' or 'nenmf'") from None


def _add_problem_flags(parser):
    parser.add_argument("--n", type=int, help="rows of X")
    parser.add_argument("--m", type=int, help="columns of X")
    parser.add_argument("--p", type=int, help="rank")
    parser.add_argument("--iters", type=int, help="outer NMF iterations")


def _add_grid_flags(parser):
    parser.add_argument("--nu", type=int, help="oversampling for GC/RSI/CountGauss")
    parser.add_argument("--nu-i", type=int, help="per-refresh oversampling for GCS (default: --nu)")
    parser.add_argument("--mu", type=int, help="CountSketch oversampling (adds a CountGauss cell)")
    parser.add_argument("--q", type=int, help="subspace iterations for RSI (default 4)")
    parser.add_argument("--max-iter", type=_max_iter, help="GCS refresh period, integer or 'inf'")
    parser.add_argument(
        "--strategy", type=_strategy, action="append",
        help="strategy label, repeatable (e.g. 'gcs:nu_i=10,max_iter=1')",
    )


def _add_run_flags(parser):
    parser.add_argument("--seeds", type=int, help="number of simulations")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--solver", type=_solver, action="append", help="'as' or 'nenmf', repeatable")
    parser.add_argument("--out", help="output directory (env GCSNMF_OUT_DIR also works)")


def build_parser():
    parser = argparse.ArgumentParser(prog="gcsnmf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file and flags")
    run.add_argument("--config", help="experiment config file")
    _add_problem_flags(run)
    _add_grid_flags(run)
    _add_run_flags(run)

    cost = sub.add_parser("cost", help="print the operation-count report")
    _add_problem_flags(cost)
    _add_grid_flags(cost)
    cost.add_argument("--out", help="also write cost_report.txt to this directory")

    demo = sub.add_parser("demo", help="built-in desk-scale experiment (n=m=200, p=5)")
    _add_run_flags(demo)
    demo.add_argument("--iters", type=int, help="outer NMF iterations (default 100)")
    return parser


def _grid_from_flags(args, fallback):
    if args.strategy:
        return tuple(args.strategy)
    flags = (args.nu, args.nu_i, args.mu, args.q, args.max_iter)
    if all(f is None for f in flags):
        return fallback
    nu = args.nu if args.nu is not None else 10
    return standard_grid(
        nu,
        q=4 if args.q is None else args.q,
        nu_i=args.nu_i,
        max_iter=1 if args.max_iter is None else args.max_iter,
        mu=args.mu,
    )


def _run(cfg):
    logger.info("running %d seeds x %d cells", cfg.num_seeds, len(cfg.solvers) * len(cfg.strategies))
    result = run_experiment(cfg)
    paths = write_outputs(result, cfg.output_dir)
    for path in paths:
        print(path)
    if result.errors:
        print(f"{len(result.errors)} run(s) failed; see errors.txt", file=sys.stderr)
    return 0


def cmd_run(args):
    base = load_config(args.config) if args.config else {}
    grid = _grid_from_flags(args, base.get("strategies", default_grid()))
    fields = dict(base)
    fields["strategies"] = grid
    fields["output_dir"] = resolve_output_dir(args.out, base.get("output_dir"))
    cfg = ExperimentConfig(**fields)
    cfg = with_overrides(
        cfg,
        n=args.n, m=args.m, p=args.p, outer_iters=args.iters, num_seeds=args.seeds,
        base_seed=args.seed, solvers=tuple(args.solver) if args.solver else None,
    )
    return _run(cfg)


def cmd_cost(args):
    defaults = ExperimentConfig.__dataclass_fields__
    n = args.n or defaults["n"].default
    m = args.m or defaults["m"].default
    p = args.p or defaults["p"].default
    iters = args.iters or defaults["outer_iters"].default
    grid = _grid_from_flags(args, standard_grid(10))
    for spec in grid:
        spec.validate(n, m, p)
    text = cost_report(n, m, p, iters, grid)
    print(text, end="")
    if args.out:
        from pathlib import Path

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cost_report.txt").write_text(text)
    return 0


def cmd_demo(args):
    cfg = ExperimentConfig(output_dir=resolve_output_dir(args.out, "demo_results"))
    cfg = with_overrides(
        cfg, base_seed=args.seed, num_seeds=args.seeds, outer_iters=args.iters,
        solvers=tuple(args.solver) if args.solver else None,
    )
    return _run(cfg)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "cost": cmd_cost, "demo": cmd_demo}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"gcsnmf {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
