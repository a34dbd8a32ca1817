"""
delayshare command line.

    python main.py validate fixtures/example2.json
    python main.py duration fixtures/example2.json
    python main.py allocate fixtures/example2.json --rule stoch --m 10000 --m1 1000 --seed 7
    python main.py experiment fixtures/example2.json --runs 1000 --outdir study_results
"""

import argparse
import logging
import sys
from typing import List, Optional

from scheduling import settings
from scheduling.allocation import SamplingPlan, shapley_det, shapley_stoch, survey_plan
from scheduling.errors import (
    BudgetError,
    CycleError,
    DomainError,
    IoError,
    ParseError,
    SchemaError,
)
from scheduling.experiments import conditional_study, density_grids
from scheduling.game import ADJUSTMENTS, CLAMP
from scheduling.project import early_times, project_duration
from scheduling.project_file import load_project, validate_file
from utils import allocation_table, format_number, render_table, vector_text
from utils.logger_config import configure_logging, get_logger
from utils.process_manager import process_manager
from utils.results_manager import ResultsManager, write_allocation

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3


def _plan(args) -> SamplingPlan:
    return SamplingPlan(
        m=args.m,
        m1=args.m1,
        seed=settings.resolve_seed(args.seed),
        alpha=args.alpha,
        workers=settings.resolve_workers(args.workers),
        exact_cutoff=args.exact_cutoff,
        force_sampling=getattr(args, "force_sampling", False),
        tabulate=getattr(args, "tabulate", False),
        incremental=getattr(args, "incremental", False),
    )


def cmd_validate(args) -> int:
    report = validate_file(args.path)
    for line in report.lines():
        print(line)
    if not report.valid:
        for violation in report.violations:
            logger.error(f"{args.path}: {violation}")
    return EXIT_OK if report.valid else EXIT_INVALID


def _duration_rows(project, durations, cost):
    starts = early_times(project, durations)
    rows = []
    for i, label in enumerate(project.labels):
        rows.append([label, format_number(float(durations[i])), format_number(float(starts[i])),
                     format_number(float(starts[i] + durations[i]))])
    makespan = project_duration(project, durations)
    return rows, makespan, cost(project, durations)


def cmd_duration(args) -> int:
    project_file = load_project(args.path, args.delta)
    project, cost = project_file.project, project_file.cost
    scenarios = [("actual", project_file.actual())]
    if project_file.has_planned:
        scenarios.append(("planned", [a.planned for a in project_file.activities]))
    if project_file.has_distributions:
        scenarios.append(("mean", list(project_file.stochastic_problem().means())))
    for name, durations in scenarios:
        rows, makespan, delay = _duration_rows(project, list(map(float, durations)), cost)
        print(f"[{name} durations]")
        print(render_table(["activity", "duration", "early_start", "early_finish"], rows))
        print(f"makespan: {format_number(makespan)}   delay cost: {format_number(delay)}")
        print()
    return EXIT_OK


def cmd_allocate(args) -> int:
    project_file = load_project(args.path, args.delta)
    plan = _plan(args)
    if args.rule == "det":
        allocation = shapley_det(project_file.deterministic_problem(args.adjustment), plan)
    else:
        problem = project_file.stochastic_problem()
        allocation = shapley_stoch(problem, plan)
        if args.survey:
            allocation.meta.update(survey_plan(problem, plan, args.survey))

    print(f"{args.rule} allocation of {project_file.name or args.path} "
          f"({allocation.meta.get('method')})")
    print(allocation_table(allocation))
    for key, value in sorted(allocation.error_summary().items()):
        print(f"{key}: {format_number(value, 3)}")
    if "value_rel_err_pct" in allocation.meta:
        print(f"value_rel_err_pct: {format_number(allocation.meta['value_rel_err_pct'], 3)}")
    if args.out:
        write_allocation(allocation, args.out)
        logger.info(f"Allocation written to {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    project_file = load_project(args.path, args.delta)
    problem = project_file.stochastic_problem()
    plan = _plan(args)
    results = ResultsManager(args.outdir)
    results.start_study({
        "project": args.path, "runs": args.runs, "m": plan.m, "m1": plan.m1,
        "seed": plan.seed, "alpha": plan.alpha, "workers": plan.workers,
        "adjustment": args.adjustment,
    })
    outcome = conditional_study(problem, args.runs, plan, args.adjustment)
    results.write_study(outcome, density_grids(outcome.densities))

    result = outcome.result
    print(f"accepted runs: {result.runs}   rejected draws: {result.rejection_count}")
    print(f"mean cost: {format_number(result.mean_cost)}")
    print(f"mean SSh: {vector_text(result.mean_alloc)}")
    print(f"mean Sh:  {vector_text(result.mean_det_alloc)}")
    rows = [[row["rule"], row["activity"], format_number(row["non_negative_pct"], 1),
             format_number(row["negative_pct"], 1)] for row in outcome.signs.rows()]
    print(render_table(["rule", "activity", ">=0 %", "<0 %"], rows))
    print(f"artifacts written to {args.outdir}")
    return EXIT_OK


def _add_sampling_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--m", type=int, default=settings.DEFAULT_M, help="permutations")
    parser.add_argument("--m1", type=int, default=settings.DEFAULT_M1,
                        help="rows of the shared sample matrix")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"root seed (default ${settings.SEED_ENV_VAR} or 0)")
    parser.add_argument("--alpha", type=float, default=settings.DEFAULT_ALPHA)
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes; 0 uses every physical core")
    parser.add_argument("--exact-cutoff", type=int, default=settings.EXACT_CUTOFF)
    parser.add_argument("--adjustment", choices=ADJUSTMENTS, default=CLAMP,
                        help="planned durations of the expected-duration problem")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Allocate project delay costs among activities")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", help="check a project file")
    validate.add_argument("path")
    validate.set_defaults(handler=cmd_validate)

    duration = commands.add_parser("duration", help="early times, makespan and delay cost")
    duration.add_argument("path")
    duration.add_argument("--delta", type=float, default=None, help="override the threshold")
    duration.set_defaults(handler=cmd_duration)

    allocate = commands.add_parser("allocate", help="Shapley allocation of the delay cost")
    allocate.add_argument("path")
    allocate.add_argument("--rule", choices=["det", "stoch"], default="stoch")
    allocate.add_argument("--delta", type=float, default=None, help="override the threshold")
    _add_sampling_flags(allocate)
    allocate.add_argument("--force-sampling", action="store_true",
                          help="sample even when the exact path is available")
    allocate.add_argument("--tabulate", action="store_true",
                          help="evaluate every coalition on the sample matrix instead of "
                               "sampling permutations")
    allocate.add_argument("--incremental", action="store_true",
                          help="recompute finish times only downstream of each joining activity")
    allocate.add_argument("--survey", type=int, default=0, metavar="K",
                          help="also report the mean relative error of v(S) over K coalitions")
    allocate.add_argument("--out", default=None, help="write the allocation (.json or .csv)")
    allocate.set_defaults(handler=cmd_allocate)

    experiment = commands.add_parser("experiment", help="conditional study of delayed realizations")
    experiment.add_argument("path")
    experiment.add_argument("--runs", type=int, default=settings.DEFAULT_RUNS)
    experiment.add_argument("--delta", type=float, default=None, help="override the threshold")
    _add_sampling_flags(experiment)
    experiment.add_argument("--outdir", default="study_results")
    experiment.set_defaults(handler=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    configure_logging(console_level=level, force_reconfigure=True)

    try:
        return args.handler(args)
    except (ParseError, SchemaError, CycleError, DomainError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_INVALID
    except (BudgetError, IoError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_FAILED
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_FAILED
    finally:
        process_manager.cleanup_all_tracked(force_kill=True)


if __name__ == "__main__":
    sys.exit(main())
