"""
Shapley allocation of delay costs.

Small games are solved exactly by subset enumeration. Larger ones use the
permutation-sampling estimator: permutations are drawn uniformly, each one
contributes the marginal cost of every activity as it joins, and the payments
are the averages of those marginals. Stochastic games are evaluated on one
shared sample matrix drawn before any permutation is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from scheduling import settings
from scheduling.distributions import PERMUTATION_STREAM, SURVEY_STREAM, RngStream
from scheduling.errors import BudgetError, DomainError
from scheduling.game import (
    CharacteristicFunction,
    DeterministicProblem,
    SampleMatrix,
    StochasticProblem,
    deterministic_game,
    draw_sample_matrix,
    eliminate,
    exact_path_available,
    exact_stochastic_game,
    full_mask,
    pathwise_monotone,
    sampled_costs,
    sampled_stochastic_game,
)
from scheduling.project import finish_times
from scheduling.running_stats import RunningStats
from utils.logger_config import get_logger
from utils.process_manager import process_manager

logger = get_logger(__name__)

EXACT = "exact"
SAMPLED = "sampled"
TABULATED = "tabulated"


@dataclass(frozen=True)
class SamplingPlan:
    """
    Knobs of one allocation run.

    Attributes:
        m: permutations drawn
        m1: rows of the shared sample matrix (stochastic games only)
        seed: root seed of every random stream used by the run
        alpha: significance level of the reported relative errors
        workers: worker processes; results do not depend on it
        exact_cutoff: largest n solved by subset enumeration
        exact_budget: largest support product the exact oracle may enumerate
        force_sampling: sample even when an exact path exists
        tabulate: for n <= exact_cutoff, apply the exact formula to the estimated game
        incremental: recompute finish times only downstream of the joining activity
    """

    m: int = settings.DEFAULT_M
    m1: int = settings.DEFAULT_M1
    seed: int = 0
    alpha: float = settings.DEFAULT_ALPHA
    workers: int = 1
    exact_cutoff: int = settings.EXACT_CUTOFF
    exact_budget: int = settings.EXACT_BUDGET
    force_sampling: bool = False
    tabulate: bool = False
    incremental: bool = False

    def __post_init__(self):
        if self.m < 1 or self.m1 < 1:
            raise DomainError(f"m and m1 must be >= 1, got m={self.m}, m1={self.m1}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class Allocation:
    """Per-activity payments, with standard errors when they were estimated."""

    payments: np.ndarray
    labels: Tuple[str, ...]
    std_errors: Optional[np.ndarray] = None
    meta: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.payments.size

    @property
    def total(self) -> float:
        return math.fsum(self.payments)

    @property
    def alpha(self) -> float:
        return self.meta.get("alpha", settings.DEFAULT_ALPHA)

    def rel_err_pct(self) -> np.ndarray:
        """Relative half-width in percent per activity; nan without errors or for zero payments."""
        if self.std_errors is None:
            return np.full(self.n, math.nan)
        z = normal_quantile(self.alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            relative = z * self.std_errors * 100 / np.abs(self.payments)
        return np.where(self.payments == 0, math.nan, relative)

    def error_summary(self) -> Dict[str, float]:
        """Both averages reported for the rule: mean relative error, and relative error of the mean size."""
        if self.std_errors is None:
            return {}
        relative = self.rel_err_pct()
        finite = relative[np.isfinite(relative)]
        mean_abs = float(np.mean(np.abs(self.payments)))
        z = normal_quantile(self.alpha)
        return {
            "avg_activity_rel_err_pct": float(finite.mean()) if finite.size else math.nan,
            "rel_err_of_avg_abs_payment_pct":
                float(z * np.mean(self.std_errors) * 100 / mean_abs) if mean_abs > 0 else math.nan,
        }

    def records(self) -> List[Dict]:
        relative = self.rel_err_pct()
        rows = []
        for i in range(self.n):
            rows.append({
                "activity": self.labels[i],
                "payment": float(self.payments[i]),
                "std_error": None if self.std_errors is None else float(self.std_errors[i]),
                "rel_err_pct": None if not math.isfinite(relative[i]) else float(relative[i]),
            })
        return rows


def normal_quantile(alpha: float) -> float:
    """z_{alpha/2}: the upper alpha/2 quantile of the standard normal."""
    return float(stats.norm.ppf(1 - alpha / 2))


def half_width(samples: Sequence[float], alpha: float = settings.DEFAULT_ALPHA) -> float:
    """Absolute confidence half-width z_{alpha/2} * s / sqrt(n) of a sample mean."""
    values = np.asarray(samples, dtype=float)
    if values.size < 2:
        raise DomainError("need at least two samples")
    return normal_quantile(alpha) * float(values.std(ddof=1)) / math.sqrt(values.size)


def relative_error_pct(samples: Sequence[float], alpha: float = settings.DEFAULT_ALPHA) -> float:
    """z_{alpha/2} * (s / sqrt(n)) * 100 / |mean|."""
    values = np.asarray(samples, dtype=float)
    if values.size < 2:
        raise DomainError("need at least two samples")
    centre = float(values.mean())
    if centre == 0:
        raise DomainError(
            f"relative error undefined for a zero mean; absolute half-width is "
            f"{half_width(values, alpha):g}"
        )
    return half_width(values, alpha) * 100 / abs(centre)


def shapley_from_table(table: np.ndarray, n: int) -> np.ndarray:
    """Shapley value of a game given as 2^n values indexed by coalition mask."""
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = np.zeros(masks.size, dtype=np.int64)
    for i in range(n):
        sizes += (masks >> i) & 1
    weights = np.array([
        math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)
    ])
    phi = np.empty(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.dot(weights[sizes[without]], table[without | bit] - table[without])
    return phi


def exact_shapley(game: CharacteristicFunction, cutoff: int = settings.EXACT_CUTOFF,
                  labels: Optional[Sequence[str]] = None) -> Allocation:
    """Shapley value by full subset enumeration."""
    if game.n > cutoff:
        raise BudgetError(f"{game.n} players exceed the exact cutoff of {cutoff}")
    phi = shapley_from_table(game.table(), game.n)
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(game.n))
    return Allocation(phi, labels, meta={"method": EXACT})


class CoalitionWalker:
    """
    Grows one coalition along a permutation, keeping finish times up to date.

    Only the joining activity and its successors are recomputed at each step;
    the values equal a full recomputation exactly.
    """

    def __init__(self, problem: StochasticProblem, samples: SampleMatrix):
        root = problem.root
        if not hasattr(root.cost, "of_makespan"):
            raise DomainError("incremental evaluation needs a makespan-based cost")
        self.root = root
        self.index = problem.root_index
        self.grand = problem.reduction is None
        self.n = problem.n
        self.base_rows = samples.values
        self.base_finish = finish_times(root.project, samples.values)
        self.rows = self.base_rows.copy()
        self.finish = self.base_finish.copy()
        self.size = 0

    def reset(self) -> None:
        np.copyto(self.rows, self.base_rows)
        np.copyto(self.finish, self.base_finish)
        self.size = 0

    def add(self, i: int) -> float:
        r = int(self.index[i])
        self.rows[:, r] = self.root.actual[r]
        finish_times(self.root.project, self.rows, self.finish, self.root.project.downstream[r])
        self.size += 1
        if self.grand and self.size == self.n:
            return self.root.realized_cost
        return float(self.root.cost.of_makespan(self.finish.max(axis=1)).mean())


class _PermutationJob:
    """Everything a worker needs to evaluate a block of permutations."""

    def __init__(self, n: int, m: int, seed: int,
                 deterministic: Optional[DeterministicProblem] = None,
                 stochastic: Optional[StochasticProblem] = None,
                 samples: Optional[SampleMatrix] = None,
                 incremental: bool = False, check_monotone: bool = False):
        self.n = n
        self.m = m
        self.seed = seed
        self.deterministic = deterministic
        self.stochastic = stochastic
        self.samples = samples
        self.incremental = incremental
        self.check_monotone = check_monotone
        self._game: Optional[CharacteristicFunction] = None
        self._walker: Optional[CoalitionWalker] = None

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_game"] = None
        state["_walker"] = None
        return state

    def marginals(self, order: np.ndarray) -> np.ndarray:
        out = np.empty(self.n)
        previous = 0.0
        if self.incremental:
            if self._walker is None:
                self._walker = CoalitionWalker(self.stochastic, self.samples)
            self._walker.reset()
            for i in order:
                value = self._walker.add(int(i))
                out[i] = value - previous
                previous = value
            return out
        if self._game is None:
            if self.deterministic is not None:
                self._game = deterministic_game(self.deterministic)
            else:
                self._game = sampled_stochastic_game(self.stochastic, self.samples)
        mask = 0
        for i in order:
            mask |= 1 << int(i)
            value = self._game.value(mask)
            out[i] = value - previous
            previous = value
        return out


def _permutation_chunk(job: _PermutationJob, chunk: int) -> Tuple[RunningStats, int]:
    start = chunk * settings.PERMUTATION_CHUNK
    stop = min(start + settings.PERMUTATION_CHUNK, job.m)
    accumulator = RunningStats(job.n)
    negatives = 0
    for p in range(start, stop):
        order = RngStream(job.seed, p, PERMUTATION_STREAM).generator().permutation(job.n)
        marginals = job.marginals(order)
        if job.check_monotone:
            negatives += int(np.count_nonzero(marginals < -1e-12))
        accumulator.add(marginals)
    return accumulator, negatives


def _sample_permutations(job: _PermutationJob, workers: int) -> RunningStats:
    n_chunks = -(-job.m // settings.PERMUTATION_CHUNK)
    results = process_manager.run_chunks(_permutation_chunk, job, n_chunks, workers,
                                         label="permutation blocks")
    total = RunningStats(job.n)
    negatives = 0
    for accumulator, count in results:
        total = total.merge(accumulator)
        negatives += count
    if negatives:
        logger.warning(
            f"{negatives} negative marginal contributions although every actual duration "
            f"exceeds every sampled one; estimates may be noisy"
        )
    return total


def _sampled_allocation(stats_: RunningStats, labels: Sequence[str], meta: Dict) -> Allocation:
    return Allocation(stats_.mean.copy(), tuple(labels), stats_.std_error, meta)


def shapley_det(problem: DeterministicProblem, plan: Optional[SamplingPlan] = None) -> Allocation:
    """Sh(P): Shapley value of v^P, exact up to the cutoff and sampled beyond."""
    plan = plan or SamplingPlan(seed=settings.resolve_seed())
    meta = {"rule": "det", "alpha": plan.alpha}
    if problem.adjustment:
        meta["planned_adjustment"] = problem.adjustment
        meta["adjusted_activities"] = [problem.project.labels[i] for i in problem.adjusted]
    if problem.n <= plan.exact_cutoff and not plan.force_sampling:
        allocation = exact_shapley(deterministic_game(problem), plan.exact_cutoff,
                                   problem.project.labels)
        allocation.meta.update(meta)
        return allocation

    logger.info(f"Sampling Sh with m={plan.m}, seed={plan.seed} for {problem.n} activities")
    job = _PermutationJob(problem.n, plan.m, plan.seed, deterministic=problem)
    accumulator = _sample_permutations(job, plan.workers)
    meta.update({"method": SAMPLED, "m": plan.m, "seed": plan.seed})
    return _sampled_allocation(accumulator, problem.project.labels, meta)


def shapley_stoch(problem: StochasticProblem, plan: SamplingPlan) -> Allocation:
    """
    SSh(SP): Shapley value of v^SP.

    Exact when every duration is discrete and enumeration fits the budget;
    otherwise estimated from m permutations on one shared m1-row sample matrix.
    """
    meta = {"rule": "stoch", "alpha": plan.alpha}
    labels = problem.project.labels
    if (problem.n <= plan.exact_cutoff and not plan.force_sampling
            and exact_path_available(problem, plan.exact_budget)):
        allocation = exact_shapley(exact_stochastic_game(problem, plan.exact_budget),
                                   plan.exact_cutoff, labels)
        allocation.meta.update(meta)
        return allocation

    samples = draw_sample_matrix(problem, plan.m1, plan.seed)
    meta.update({"m1": plan.m1, "seed": plan.seed})
    if plan.tabulate and problem.n <= plan.exact_cutoff:
        logger.info(f"Tabulating SSh on m1={plan.m1} rows for {problem.n} activities")
        allocation = exact_shapley(sampled_stochastic_game(problem, samples),
                                   plan.exact_cutoff, labels)
        allocation.meta.update(meta)
        allocation.meta["method"] = TABULATED
        return allocation

    logger.info(
        f"Sampling SSh with m={plan.m}, m1={plan.m1}, seed={plan.seed} "
        f"for {problem.n} activities"
    )
    job = _PermutationJob(problem.n, plan.m, plan.seed, stochastic=problem, samples=samples,
                          incremental=plan.incremental,
                          check_monotone=pathwise_monotone(problem, samples))
    accumulator = _sample_permutations(job, plan.workers)
    meta.update({"method": SAMPLED, "m": plan.m})
    return _sampled_allocation(accumulator, labels, meta)


def balancedness_residual(problem: StochasticProblem, i: int, j: int,
                          budget: int = settings.EXACT_BUDGET,
                          cutoff: int = settings.EXACT_CUTOFF, nested: bool = False) -> float:
    """
    |[SSh_i(SP) - SSh_i(SP_-j)] - [SSh_j(SP) - SSh_j(SP_-i)]| with exact game values.

    With `nested`, the reduced problems integrate their own expected cost
    instead of reading values off the full problem.
    """
    if i == j or problem.n < 2:
        raise DomainError("balancedness compares two distinct activities of a problem with n >= 2")
    if problem.n > cutoff or not exact_path_available(problem, budget):
        raise BudgetError("balancedness residual needs the exact evaluation path")

    def exact(p: StochasticProblem) -> np.ndarray:
        return exact_shapley(exact_stochastic_game(p, budget, nested), cutoff).payments

    full = exact(problem)
    without_j = exact(eliminate(problem, j))
    without_i = exact(eliminate(problem, i))
    i_in_reduced = i if i < j else i - 1
    j_in_reduced = j if j < i else j - 1
    return abs((full[i] - without_j[i_in_reduced]) - (full[j] - without_i[j_in_reduced]))


def value_error_survey(problem: StochasticProblem, samples: SampleMatrix, coalitions: int = 1000,
                       alpha: float = settings.DEFAULT_ALPHA, seed: int = 0) -> Dict[str, float]:
    """
    Average relative error (percent) of the estimated v(S) over random coalitions.

    Coalitions are drawn by including each activity with probability 1/2; the
    empty and grand coalitions carry no estimation error and are skipped, as are
    coalitions whose estimate is zero.
    """
    rng = RngStream(seed, 0, SURVEY_STREAM).generator()
    errors = []
    skipped = 0
    for _ in range(coalitions):
        inside = rng.random(problem.n) < 0.5
        mask = sum(1 << int(i) for i in np.flatnonzero(inside))
        if mask == 0 or mask == full_mask(problem.n) or samples.m1 < 2:
            skipped += 1
            continue
        costs = sampled_costs(problem, mask, samples)
        if costs.mean() == 0:
            skipped += 1
            continue
        errors.append(relative_error_pct(costs, alpha))
    return {
        "value_rel_err_pct": float(np.mean(errors)) if errors else math.nan,
        "coalitions_used": len(errors),
        "coalitions_skipped": skipped,
    }


def survey_plan(problem: StochasticProblem, plan: SamplingPlan, coalitions: int) -> Dict[str, float]:
    """Error survey of v(S) on the same sample matrix an allocation run with `plan` uses."""
    samples = draw_sample_matrix(problem, plan.m1, plan.seed)
    return value_error_survey(problem, samples, coalitions, plan.alpha, plan.seed)
