"""
Conditional studies on delayed realizations.

A study repeatedly draws realized durations x from X0, keeps only draws that
cause a delay (C(x) > 0), and allocates each kept delay with both rules: the
Shapley rule on the expected-duration problem (Sh) and the stochastic
Shapley rule (SSh). Averages, sign frequencies and density data of
the two payment families are aggregated over the accepted runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from scheduling import settings
from scheduling.allocation import Allocation, SamplingPlan, shapley_det, shapley_stoch
from scheduling.distributions import REALIZATION_STREAM, RngStream, derive_seed
from scheduling.errors import BudgetError, DomainError
from scheduling.game import ADJUSTMENTS, CLAMP, NO_ADJUSTMENT, StochasticProblem
from utils.logger_config import get_logger
from utils.process_manager import process_manager
from utils import results_manager

logger = get_logger(__name__)

SH = "Sh"
SSH = "SSh"
RULES = (SH, SSH)


@dataclass
class RunRecord:
    """One accepted realization and both allocations of its delay."""

    index: int
    actual: np.ndarray
    cost: float
    det: Allocation
    stoch: Allocation
    rejections: int
    adjusted: Tuple[int, ...] = ()


@dataclass
class ConditionalStudyResult:
    runs: int
    labels: Tuple[str, ...]
    mean_alloc: np.ndarray
    mean_det_alloc: np.ndarray
    mean_cost: float
    rejection_count: int
    adjustment: str
    adjusted_runs: int
    costs: np.ndarray
    seed: int

    @property
    def acceptance_rate(self) -> float:
        return self.runs / (self.runs + self.rejection_count)


@dataclass
class SignFrequencyTable:
    """Percent of runs with payment >= 0 and < 0, per rule and activity."""

    labels: Tuple[str, ...]
    non_negative: Dict[str, np.ndarray]
    negative: Dict[str, np.ndarray]

    def rows(self) -> List[Dict]:
        rows = []
        for rule in RULES:
            for i, label in enumerate(self.labels):
                rows.append({
                    "rule": rule,
                    "activity": label,
                    "non_negative_pct": float(self.non_negative[rule][i]),
                    "negative_pct": float(self.negative[rule][i]),
                })
        return rows


@dataclass
class DensitySample:
    """Payments one rule gave one activity, one value per accepted run."""

    rule: str
    activity: str
    values: np.ndarray
    lower: Optional[float] = None


@dataclass
class StudyOutcome:
    result: ConditionalStudyResult
    signs: SignFrequencyTable
    densities: List[DensitySample]
    records: List[RunRecord] = field(default_factory=list, repr=False)


@dataclass
class DensityGrid:
    rule: str
    activity: str
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


class _StudyJob:
    def __init__(self, problem: StochasticProblem, draws: List[Tuple[np.ndarray, float, int]],
                 plan: SamplingPlan, adjustment: str):
        self.problem = problem
        self.draws = draws
        self.plan = plan
        self.adjustment = adjustment

    @property
    def runs(self) -> int:
        return len(self.draws)


def _draw_delayed(problem: StochasticProblem, run: int, seed: int) -> Tuple[np.ndarray, float, int]:
    """Rejection-sample a realization with positive cost; returns (x, C(x), rejections)."""
    rng = RngStream(seed, run, REALIZATION_STREAM).generator()
    attempts = 0
    while attempts < settings.ATTEMPT_BUDGET:
        batch = min(settings.REALIZATION_BATCH, settings.ATTEMPT_BUDGET - attempts)
        rows = np.column_stack([d.sample(rng, batch) for d in problem.planned_dists])
        costs = problem.cost.batch(problem.project, rows)
        hits = np.flatnonzero(costs > 0)
        if hits.size:
            first = int(hits[0])
            return rows[first], float(costs[first]), attempts + first
        attempts += batch
    raise BudgetError(
        f"run {run}: no delayed realization in {attempts} attempts "
        f"(acceptance rate below {settings.MIN_ACCEPTANCE_RATE:g})"
    )


def draw_delayed_realizations(problem: StochasticProblem, runs: int,
                              seed: int) -> List[Tuple[np.ndarray, float, int]]:
    """
    Draw `runs` delayed realizations, run r from its own stream.

    Once the attempts of the study reach settings.ATTEMPT_BUDGET, the
    observed acceptance rate must stay at or above
    settings.MIN_ACCEPTANCE_RATE, otherwise BudgetError.
    """
    draws = []
    attempted = 0
    for run in range(runs):
        draw = _draw_delayed(problem, run, seed)
        draws.append(draw)
        attempted += draw[2] + 1
        rate = len(draws) / attempted
        if attempted >= settings.ATTEMPT_BUDGET and rate < settings.MIN_ACCEPTANCE_RATE:
            raise BudgetError(
                f"acceptance rate {rate:.3g} after {attempted} attempts is below "
                f"{settings.MIN_ACCEPTANCE_RATE:g}; delays are too rare to study"
            )
    return draws


def _study_chunk(job: _StudyJob, chunk: int) -> List[RunRecord]:
    start = chunk * settings.RUN_CHUNK
    stop = min(start + settings.RUN_CHUNK, job.runs)
    plan = job.plan
    records = []
    for run in range(start, stop):
        actual, cost, rejections = job.draws[run]
        realized = job.problem.with_actual(actual)
        run_plan = SamplingPlan(m=plan.m, m1=plan.m1, seed=derive_seed(plan.seed, run),
                                alpha=plan.alpha, exact_cutoff=plan.exact_cutoff,
                                exact_budget=plan.exact_budget,
                                force_sampling=plan.force_sampling, tabulate=plan.tabulate,
                                incremental=plan.incremental)
        mean_problem = realized.mean_problem(job.adjustment)
        det = shapley_det(mean_problem, run_plan)
        stoch = shapley_stoch(realized, run_plan)
        records.append(RunRecord(run, actual, cost, det, stoch, rejections, mean_problem.adjusted))
        logger.debug(f"Run {run}: C(x)={cost:.5f} after {rejections} rejections")
    return records


def check_delay_possible(problem: StochasticProblem) -> None:
    """Fail fast when even the largest possible durations cause no delay."""
    uppers = np.array([d.upper() for d in problem.planned_dists])
    if np.all(np.isfinite(uppers)) and problem.cost(problem.project, uppers) <= 0:
        raise BudgetError(
            "no realization can be delayed: the cost is 0 even at the upper bounds of "
            "every duration's support, so the acceptance probability is 0"
        )


def sign_frequencies(labels: Sequence[str], det: np.ndarray, stoch: np.ndarray) -> SignFrequencyTable:
    """det and stoch are (runs, n) payment matrices."""
    non_negative, negative = {}, {}
    for rule, payments in ((SH, det), (SSH, stoch)):
        runs = payments.shape[0]
        below = np.count_nonzero(payments < 0, axis=0)
        negative[rule] = below * 100.0 / runs
        non_negative[rule] = (runs - below) * 100.0 / runs
    return SignFrequencyTable(tuple(labels), non_negative, negative)


def conditional_study(problem: StochasticProblem, runs: int, plan: SamplingPlan,
                      adjustment: str = CLAMP) -> StudyOutcome:
    """
    Allocate `runs` delayed realizations of `problem` with both rules.

    Args:
        problem: Planned distributions, cost and precedences; its actual
            durations are ignored
        runs: Number of accepted (delayed) realizations
        plan: Sampling plan; run r uses a seed derived from (plan.seed, r)
        adjustment: How the expected-duration problem treats realized
            durations below their means ("clamp" or "none")

    Returns:
        StudyOutcome with the aggregated result, sign table, density samples
        and the per-run records
    """
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs}")
    if adjustment not in ADJUSTMENTS:
        raise DomainError(f"adjustment must be one of {ADJUSTMENTS}, got {adjustment!r}")
    check_delay_possible(problem)
    if adjustment == NO_ADJUSTMENT:
        planned_cost = problem.cost(problem.project, problem.means())
        if planned_cost != 0:
            raise DomainError(
                f"adjustment 'none' needs a zero cost at the expected durations, got {planned_cost:g}"
            )

    logger.info(
        f"Conditional study: runs={runs}, m={plan.m}, m1={plan.m1}, seed={plan.seed}, "
        f"workers={plan.workers}, adjustment={adjustment}"
    )
    draws = draw_delayed_realizations(problem, runs, plan.seed)
    job = _StudyJob(problem, draws, plan, adjustment)
    n_chunks = -(-runs // settings.RUN_CHUNK)
    chunks = process_manager.run_chunks(_study_chunk, job, n_chunks, plan.workers,
                                        label="study run blocks")
    records = [record for chunk in chunks for record in chunk]

    labels = problem.project.labels
    det = np.array([r.det.payments for r in records])
    stoch = np.array([r.stoch.payments for r in records])
    costs = np.array([r.cost for r in records])
    rejection_count = sum(r.rejections for r in records)
    adjusted_runs = sum(1 for r in records if r.adjusted)
    if adjusted_runs:
        logger.warning(
            f"{adjusted_runs} of {runs} runs had realized durations below their means "
            f"(adjustment: {adjustment})"
        )
    result = ConditionalStudyResult(
        runs=runs,
        labels=labels,
        mean_alloc=stoch.mean(axis=0),
        mean_det_alloc=det.mean(axis=0),
        mean_cost=float(costs.mean()),
        rejection_count=rejection_count,
        adjustment=adjustment,
        adjusted_runs=adjusted_runs,
        costs=costs,
        seed=plan.seed,
    )
    # Sh of a clamped problem is a Shapley value of a monotone game, hence never negative
    det_lower = 0.0 if adjustment == CLAMP else None
    densities = [DensitySample(SH, labels[i], det[:, i], det_lower) for i in range(problem.n)]
    densities += [DensitySample(SSH, labels[i], stoch[:, i]) for i in range(problem.n)]
    logger.info(f"Study done: mean cost {result.mean_cost:.5f}, {rejection_count} rejections")
    return StudyOutcome(result, sign_frequencies(labels, det, stoch), densities, records)


def density_grid(sample: DensitySample, points: int = settings.KDE_GRID_POINTS) -> DensityGrid:
    """
    Gaussian KDE (Silverman bandwidth) of one payment sample on an evenly spaced grid.

    The grid reaches five bandwidths past the extreme samples. With a lower
    bound the kernel is reflected at it and the grid starts there. Constant
    samples give a narrow normal spike.
    """
    values = np.asarray(sample.values, dtype=float)
    if values.size == 0:
        raise DomainError(f"no samples for {sample.rule} activity {sample.activity}")
    spread = float(values.std(ddof=1)) if values.size > 1 else 0.0
    if spread > 0:
        kde = stats.gaussian_kde(values, bw_method="silverman")
        bandwidth = float(kde.factor * spread)
        pdf = kde.evaluate
    else:
        bandwidth = max(1e-3 * abs(float(values[0])), 1e-3)
        centre = float(values[0])
        pdf = lambda x: stats.norm.pdf(x, loc=centre, scale=bandwidth)

    low = float(values.min()) - 5 * bandwidth
    high = float(values.max()) + 5 * bandwidth
    if sample.lower is not None:
        low = sample.lower
    grid = np.linspace(low, high, points)
    density = pdf(grid)
    if sample.lower is not None:
        density = density + pdf(2 * sample.lower - grid)
    return DensityGrid(sample.rule, sample.activity, grid, density, bandwidth)


def density_grids(data: Sequence[DensitySample],
                  points: int = settings.KDE_GRID_POINTS) -> List[DensityGrid]:
    return [density_grid(sample, points) for sample in data]


def export_density(data: Sequence[DensitySample], path, points: int = settings.KDE_GRID_POINTS):
    """Write density_grid.csv and density_samples.csv under `path`; returns both paths."""
    if not data:
        raise DomainError("no density samples to export")
    return results_manager.write_density_files(density_grids(data, points), data, path)


def efficiency_gaps(records: Sequence[RunRecord]) -> np.ndarray:
    """Per run, the largest |sum of payments - C(x)| over both rules."""
    return np.array([
        max(abs(math.fsum(r.det.payments) - r.cost), abs(math.fsum(r.stoch.payments) - r.cost))
        for r in records
    ])
