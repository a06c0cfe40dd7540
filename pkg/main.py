import argparse
import logging
import sys
from typing import List, Optional

from dcboost.bench import BenchSpec, resolve_card, run_bench, run_sigma_sweep, run_single
from dcboost.config import Settings, load_settings
from dcboost.dc_core import ConfigurationError, InvariantViolation
from dcboost.logger import setup_logging
from dcboost.nu_strategies import NU_STRATEGIES
from dcboost.problems import FAMILIES, catalog
from dcboost.solvers import SOLVERS, STEP_RESTARTS, descent_violations
from dcboost.inner_solver import INNER_METHODS
from dcboost.utils import parse_floats

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="config.yaml", help="YAML settings file")
    common.add_argument("--problem")
    common.add_argument("--solver", choices=SOLVERS)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--lambda-init", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--zeta", type=float)
    common.add_argument("--omega", type=float)
    common.add_argument("--nu-strategy", choices=NU_STRATEGIES)
    common.add_argument("--alpha", type=float, help="PPMDC proximal parameter")
    common.add_argument("--inner", choices=INNER_METHODS)
    common.add_argument("--step-restart", choices=STEP_RESTARTS)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--log-level")

    parser = argparse.ArgumentParser(prog="dcboost", description="Boosted DC algorithm benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("catalog", parents=[common], help="list problem cards")
    run = sub.add_parser("run", parents=[common], help="single run with per-iteration trace")
    run.add_argument("--x0", help="comma-separated start point; default is trial 0 of the seed")
    sub.add_parser("bench", parents=[common], help="seeded multi-trial statistics")
    sweep = sub.add_parser("sweep", parents=[common], help="sigma sweep over a re-decomposed family")
    sweep.add_argument("--family", choices=FAMILIES, default="p6_2")
    sweep.add_argument("--sigmas", default="1:20", help="e.g. 1,5,10,20 or 1:20")
    return parser


def settings_from_args(args: argparse.Namespace) -> Settings:
    st = load_settings(args.config)
    return st.with_overrides(
        problem=args.problem,
        solver=args.solver,
        trials=args.trials,
        seed=args.seed,
        lambda_init=args.lambda_init,
        rho=args.rho,
        zeta=args.zeta,
        omega=args.omega,
        nu_strategy=args.nu_strategy,
        alpha=args.alpha,
        inner_method=args.inner,
        step_restart=args.step_restart,
        workers=args.workers,
        out_dir=args.out,
        log_level=args.log_level,
    )


def _cmd_catalog() -> int:
    for card in catalog():
        p = card.problem
        opt = "-" if p.phi_star is None else repr(p.phi_star)
        print(f"{card.id:14s} n={p.dim} sigma={p.sigma:g} lambda_init={card.lambda_init_default:g} "
              f"phi*={opt}  {card.notes}")
    return EXIT_OK


def _cmd_run(st: Settings, x0_text: Optional[str]) -> int:
    card = resolve_card(st.problem)
    x0 = parse_floats(x0_text)
    spec = BenchSpec(
        problem_id=st.problem, solver=st.solver,
        config=st.solver_config(card.lambda_init_default, card.problem.dim),
        trials=1, seed=st.seed, out_dir=st.out_dir, opt_tol=st.opt_tol,
        x0=None if x0 is None else tuple(x0),
    )
    trace = run_single(spec)
    bad = descent_violations(trace, card.problem.sigma)
    if bad:
        logging.getLogger("main").error("%d descent violations in %s/%s", bad, card.id, st.solver)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_bench(st: Settings) -> int:
    card = resolve_card(st.problem)
    spec = BenchSpec(
        problem_id=st.problem, solver=st.solver,
        config=st.solver_config(card.lambda_init_default, card.problem.dim),
        trials=st.trials, seed=st.seed, out_dir=st.out_dir, opt_tol=st.opt_tol, workers=st.workers,
    )
    stats = run_bench(spec)
    return EXIT_INVARIANT if stats.violations else EXIT_OK


def _cmd_sweep(st: Settings, family: str, sigmas_text: str) -> int:
    sigmas = parse_floats(sigmas_text) or []
    if not sigmas:
        raise ConfigurationError("Config error: --sigmas is empty")
    base = resolve_card(family)
    run_sigma_sweep(
        family, sigmas, st.trials, st.seed,
        st.solver_config(base.lambda_init_default, base.problem.dim),
        out_dir=st.out_dir, workers=st.workers,
    )
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        st = settings_from_args(args)
    except ConfigurationError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    setup_logging(st.log_level, st.log_file)
    log = logging.getLogger("main")

    try:
        if args.command == "catalog":
            return _cmd_catalog()
        if args.command == "run":
            return _cmd_run(st, args.x0)
        if args.command == "bench":
            return _cmd_bench(st)
        return _cmd_sweep(st, args.family, args.sigmas)
    except ConfigurationError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except ValueError as e:
        log.error("bad argument: %s", e)
        return EXIT_USAGE
    except InvariantViolation as e:
        log.error("invariant violation: %s", e)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
