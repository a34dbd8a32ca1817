"""
Delay-cost games built from scheduling problems.

Deterministic problems give the game v^P(S) = C(x_S, x0_rest). Stochastic
problems give v^SP(S) = E(C(x_S, X0_rest)), evaluated either exactly (by
enumerating finite supports) or on a shared matrix of sampled durations.
Coalitions are Python int bitmasks (bit i set means activity i belongs), which
works for any number of activities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from scheduling import settings
from scheduling.distributions import (
    SAMPLE_MATRIX_STREAM,
    DurationDistribution,
    RngStream,
)
from scheduling.errors import BudgetError, DomainError
from scheduling.project import DelayCost, Project, as_duration_vector
from utils.logger_config import get_logger

logger = get_logger(__name__)

Coalition = Union[int, Iterable[int]]

CLAMP = "clamp"
NO_ADJUSTMENT = "none"
ADJUSTMENTS = (CLAMP, NO_ADJUSTMENT)


def coalition_mask(coalition: Coalition, n: int) -> int:
    """Bitmask of a coalition given as a mask or as an iterable of activity ids."""
    if isinstance(coalition, (int, np.integer)):
        mask = int(coalition)
        if mask < 0 or mask >> n:
            raise DomainError(f"coalition mask {mask:#x} is not a subset of {n} activities")
        return mask
    mask = 0
    for i in coalition:
        i = int(i)
        if not 0 <= i < n:
            raise DomainError(f"activity {i} is not in 0..{n - 1}")
        mask |= 1 << i
    return mask


def members(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)


def full_mask(n: int) -> int:
    return (1 << n) - 1


def masks_to_members(masks: np.ndarray, n: int) -> np.ndarray:
    """(k,) array of int masks (n <= 62) to a (k, n) boolean membership matrix."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


@dataclass(frozen=True, eq=False)
class DeterministicProblem:
    """(N, prec, x0, x, C) with x >= x0 and C(x0) = 0 unless built with strict=False."""

    project: Project
    planned: np.ndarray
    actual: np.ndarray
    cost: DelayCost
    strict: bool = True
    adjustment: str = ""
    adjusted: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "planned", as_duration_vector(self.project, self.planned))
        object.__setattr__(self, "actual", as_duration_vector(self.project, self.actual))
        if not self.strict:
            return
        late = np.flatnonzero(self.actual < self.planned)
        if late.size:
            names = [self.project.labels[i] for i in late]
            raise DomainError(f"actual durations fall below planned ones for activities {names}")
        planned_cost = self.cost(self.project, self.planned)
        if planned_cost != 0:
            raise DomainError(f"planned durations already cost {planned_cost:g}; C(x0) must be 0")

    @property
    def n(self) -> int:
        return self.project.n

    @cached_property
    def realized_cost(self) -> float:
        return self.cost(self.project, self.actual)


@dataclass(frozen=True, eq=False)
class Reduction:
    """Marks a problem as the parent problem with one activity eliminated."""

    parent: "StochasticProblem"
    removed: int
    kept: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class StochasticProblem:
    """(N, prec, X0, x, C): planned durations are independent random variables."""

    project: Project
    planned_dists: Tuple[DurationDistribution, ...]
    actual: np.ndarray
    cost: DelayCost
    reduction: Optional[Reduction] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "planned_dists", tuple(self.planned_dists))
        if len(self.planned_dists) != self.project.n:
            raise DomainError(
                f"expected {self.project.n} distributions, got {len(self.planned_dists)}"
            )
        object.__setattr__(self, "actual", as_duration_vector(self.project, self.actual))

    @property
    def n(self) -> int:
        return self.project.n

    @property
    def root(self) -> "StochasticProblem":
        return self if self.reduction is None else self.reduction.parent.root

    @cached_property
    def root_index(self) -> np.ndarray:
        """Id of each local activity inside the root problem."""
        if self.reduction is None:
            return np.arange(self.n)
        return self.reduction.parent.root_index[list(self.reduction.kept)]

    @cached_property
    def realized_cost(self) -> float:
        return self.cost(self.project, self.actual)

    def means(self) -> np.ndarray:
        return np.array([d.mean() for d in self.planned_dists])

    def with_actual(self, actual) -> "StochasticProblem":
        return replace(self, actual=np.asarray(actual, dtype=float), reduction=None)

    def mean_problem(self, adjustment: str = CLAMP) -> DeterministicProblem:
        """
        The associated deterministic problem (N, prec, E(X0), x, C).

        Realized durations may undercut expectations; "clamp" then plans
        min(E(X0_i), x_i), "none" keeps E(X0) and skips the planned-vs-actual checks.
        "none" needs C(E(X0)) = 0.
        """
        if adjustment not in ADJUSTMENTS:
            raise DomainError(f"adjustment must be one of {ADJUSTMENTS}, got {adjustment!r}")
        planned = self.means()
        short = tuple(int(i) for i in np.flatnonzero(self.actual < planned))
        if adjustment == CLAMP:
            planned = np.minimum(planned, self.actual)
            if short:
                logger.debug(f"Planned durations clamped to actuals for activities {short}")
            return DeterministicProblem(self.project, planned, self.actual, self.cost,
                                        strict=True,
                                        adjustment=CLAMP, adjusted=short)
        planned_cost = self.cost(self.project, planned)
        if planned_cost != 0:
            raise DomainError(
                f"adjustment 'none' needs a zero cost at the expected durations, got {planned_cost:g}"
            )
        return DeterministicProblem(self.project, planned, self.actual, self.cost,
                                    strict=False, adjustment=NO_ADJUSTMENT, adjusted=short)

    def root_members(self, mask: int) -> np.ndarray:
        """Boolean membership, over root activities, of a local coalition."""
        local = members(mask, self.n)
        root_in = np.zeros(self.root.n, dtype=bool)
        root_in[self.root_index[local]] = True
        return root_in


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """m1 independent draws of X0 (one row each) for the root problem's activities."""

    values: np.ndarray
    seed: int

    @property
    def m1(self) -> int:
        return self.values.shape[0]


def draw_sample_matrix(problem: StochasticProblem, m1: int, seed: int) -> SampleMatrix:
    """Column i comes from stream (seed, i), so every column is reproducible on its own."""
    if m1 < 1:
        raise DomainError(f"m1 must be >= 1, got {m1}")
    root = problem.root
    values = np.empty((m1, root.n))
    for i, dist in enumerate(root.planned_dists):
        values[:, i] = dist.sample(RngStream(seed, i, SAMPLE_MATRIX_STREAM), m1)
    return SampleMatrix(values, seed)


def pathwise_monotone(problem: StochasticProblem, samples: SampleMatrix) -> bool:
    """True when every actual duration is at least every sampled one."""
    root = problem.root
    return bool(np.all(root.actual >= samples.values.max(axis=0)))


@dataclass(frozen=True, eq=False)
class ExpectedCost(DelayCost):
    """
    Cost of a problem with one activity eliminated: C_-i(y) = E(C(y, X_i)).

    Only finite supports are integrated; this is the exact-oracle route to
    the eliminated problem's game.
    """

    parent_project: Project
    parent_cost: DelayCost
    removed: int
    dist: DurationDistribution

    def batch(self, project: Project, durations: np.ndarray) -> np.ndarray:
        if not self.dist.is_discrete:
            raise DomainError(f"cannot integrate {self.dist} exactly; only discrete supports")
        if durations.shape[1] != self.parent_project.n - 1:
            raise DomainError("duration rows do not match the eliminated problem")
        values, probs = self.dist.support()
        total = np.zeros(durations.shape[0])
        for value, prob in zip(values, probs):
            expanded = np.insert(durations, self.removed, value, axis=1)
            total += prob * self.parent_cost.batch(self.parent_project, expanded)
        return total


def det_value(problem: DeterministicProblem, coalition: Coalition) -> float:
    """v^P(S) = C(x_S, x0_rest); the empty coalition is worth 0."""
    mask = coalition_mask(coalition, problem.n)
    if mask == 0:
        return 0.0
    mixed = np.where(members(mask, problem.n), problem.actual, problem.planned)
    return problem.cost(problem.project, mixed)


def det_values(problem: DeterministicProblem, masks: np.ndarray) -> np.ndarray:
    """Vectorized det_value over an array of masks (n <= 62)."""
    inside = masks_to_members(masks, problem.n)
    mixed = np.where(inside, problem.actual[None, :], problem.planned[None, :])
    values = problem.cost.batch(problem.project, mixed)
    values[np.asarray(masks) == 0] = 0.0
    return values


def sampled_costs(problem: StochasticProblem, mask: int, samples: SampleMatrix) -> np.ndarray:
    root = problem.root
    if samples.values.shape[1] != root.n:
        raise DomainError("sample matrix columns do not match the problem's activities")
    inside = problem.root_members(mask)
    mixed = np.where(inside[None, :], root.actual[None, :], samples.values)
    return root.cost.batch(root.project, mixed)


def stoch_value_mc(problem: StochasticProblem, coalition: Coalition,
                   samples: SampleMatrix) -> Tuple[float, float]:
    """
    Monte Carlo estimate of v^SP(S) on the shared sample matrix.

    Returns (estimate, std_error); the empty coalition is 0 and the grand
    coalition of the root problem is C(x), both with std_error 0.
    """
    mask = coalition_mask(coalition, problem.n)
    if mask == 0:
        return 0.0, 0.0
    root = problem.root
    if problem.reduction is None and mask == full_mask(problem.n):
        return root.realized_cost, 0.0
    costs = sampled_costs(problem, mask, samples)
    estimate = float(costs.mean())
    if costs.size < 2:
        return estimate, math.nan
    return estimate, float(costs.std(ddof=1) / math.sqrt(costs.size))


def support_product(problem: StochasticProblem, mask: int) -> int:
    """Number of joint outcomes of the durations outside the coalition."""
    total = 1
    for i, dist in enumerate(problem.planned_dists):
        if (mask >> i) & 1:
            continue
        if not dist.is_discrete:
            raise DomainError(
                f"activity {problem.project.labels[i]} has continuous duration {dist}; "
                f"exact values need discrete or point distributions outside the coalition"
            )
        total *= len(dist.support()[0])
    return total


def stoch_value_exact(problem: StochasticProblem, coalition: Coalition,
                      budget: int = settings.EXACT_BUDGET, nested: bool = False) -> float:
    """
    Exact v^SP(S) by enumerating the joint support of X0 outside S.

    Eliminated problems are evaluated on their root problem unless
    `nested` is set, in which case their own expected cost C_-i is integrated.
    """
    mask = coalition_mask(coalition, problem.n)
    if mask == 0:
        return 0.0
    if problem.reduction is not None and not nested:
        root_mask = coalition_mask(np.flatnonzero(problem.root_members(mask)), problem.root.n)
        return stoch_value_exact(problem.root, root_mask, budget)
    if problem.reduction is None and mask == full_mask(problem.n):
        return problem.realized_cost

    outcomes = support_product(problem, mask)
    if outcomes > budget:
        raise BudgetError(f"exact expectation needs {outcomes} outcomes, budget is {budget}")

    free = [i for i in range(problem.n) if not (mask >> i) & 1]
    if not free:
        return float(problem.cost(problem.project, problem.actual))
    supports = [problem.planned_dists[i].support() for i in free]
    sizes = tuple(len(values) for values, _ in supports)
    base = problem.actual.copy()
    total = 0.0
    chunk = settings.TABULATE_BATCH
    for start in range(0, outcomes, chunk):
        flat = np.arange(start, min(start + chunk, outcomes))
        digits = np.unravel_index(flat, sizes)
        rows = np.repeat(base[None, :], flat.size, axis=0)
        weights = np.ones(flat.size)
        for column, (values, probs), digit in zip(free, supports, digits):
            rows[:, column] = values[digit]
            weights *= probs[digit]
        total += float(np.dot(weights, problem.cost.batch(problem.project, rows)))
    return total


def eliminate(problem: StochasticProblem, i: int) -> StochasticProblem:
    """
    SP_-i: drop activity i, keep the full precedence relation among the rest.

    The reduced problem remembers its parent, so its game is read off the
    parent's game on coalitions without i.
    """
    if problem.n < 2:
        raise DomainError("cannot eliminate the only activity of a problem")
    if not 0 <= i < problem.n:
        raise DomainError(f"activity {i} is not in 0..{problem.n - 1}")
    keep = tuple(j for j in range(problem.n) if j != i)
    return StochasticProblem(
        project=problem.project.restrict(keep),
        planned_dists=tuple(problem.planned_dists[j] for j in keep),
        actual=problem.actual[list(keep)],
        cost=ExpectedCost(problem.project, problem.cost, i, problem.planned_dists[i]),
        reduction=Reduction(problem, i, keep),
    )


class CharacteristicFunction:
    """
    Coalition values of a TU-game on players 0..n-1.

    `kind` is "exact" or "estimated"; estimated games also expose per-coalition
    standard errors and the number of Monte Carlo rows behind them. Values are
    memoized for games small enough that every coalition could be visited.
    """

    def __init__(self, n: int, value_fn: Callable[[int], float], kind: str = "exact",
                 std_error_fn: Optional[Callable[[int], float]] = None,
                 batch_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 m1: Optional[int] = None):
        self.n = n
        self.kind = kind
        self.m1 = m1
        self._value_fn = value_fn
        self._std_error_fn = std_error_fn
        self._batch_fn = batch_fn
        self._cache: Optional[Dict[int, float]] = {} if n <= settings.CACHE_MAX_PLAYERS else None

    def value(self, coalition: Coalition) -> float:
        mask = coalition_mask(coalition, self.n)
        if mask == 0:
            return 0.0
        if self._cache is None:
            return self._value_fn(mask)
        cached = self._cache.get(mask)
        if cached is None:
            cached = self._cache[mask] = self._value_fn(mask)
        return cached

    __call__ = value

    def std_error(self, coalition: Coalition) -> float:
        if self._std_error_fn is None:
            return 0.0
        return self._std_error_fn(coalition_mask(coalition, self.n))

    def table(self) -> np.ndarray:
        """All 2^n values indexed by mask."""
        if self.n > settings.CACHE_MAX_PLAYERS:
            raise BudgetError(f"refusing to tabulate 2^{self.n} coalitions")
        size = 1 << self.n
        if self._batch_fn is not None:
            values = np.empty(size)
            for start in range(0, size, settings.TABULATE_BATCH):
                masks = np.arange(start, min(start + settings.TABULATE_BATCH, size), dtype=np.int64)
                values[start:start + masks.size] = self._batch_fn(masks)
            values[0] = 0.0
            return values
        return np.array([self.value(mask) for mask in range(size)])


def deterministic_game(problem: DeterministicProblem) -> CharacteristicFunction:
    return CharacteristicFunction(
        problem.n,
        lambda mask: det_value(problem, mask),
        batch_fn=(lambda masks: det_values(problem, masks)) if problem.n <= 62 else None,
    )


def exact_stochastic_game(problem: StochasticProblem, budget: int = settings.EXACT_BUDGET,
                          nested: bool = False) -> CharacteristicFunction:
    return CharacteristicFunction(
        problem.n, lambda mask: stoch_value_exact(problem, mask, budget, nested)
    )


def sampled_stochastic_game(problem: StochasticProblem,
                            samples: SampleMatrix) -> CharacteristicFunction:
    return CharacteristicFunction(
        problem.n,
        lambda mask: stoch_value_mc(problem, mask, samples)[0],
        kind="estimated",
        std_error_fn=lambda mask: stoch_value_mc(problem, mask, samples)[1],
        m1=samples.m1,
    )


def exact_path_available(problem: StochasticProblem,
                         budget: int = settings.EXACT_BUDGET) -> bool:
    """Whether every coalition value can be enumerated within the budget."""
    root = problem.root
    if not all(d.is_discrete for d in root.planned_dists):
        return False
    return support_product(root, 0) <= budget


def restricted_values(problem: StochasticProblem, removed: int,
                      value_of: Callable[[StochasticProblem, int], float],
                      subsets: Optional[Sequence[int]] = None) -> Dict[int, Tuple[float, float]]:
    """
    Compare the eliminated problem's values with the parent's on the same coalitions.

    Returns {reduced mask: (value in SP_-removed, value in SP)}.
    """
    reduced = eliminate(problem, removed)
    keep = reduced.reduction.kept
    pairs = {}
    for mask in subsets if subsets is not None else range(1 << reduced.n):
        parent_mask = coalition_mask([keep[j] for j in range(reduced.n) if (mask >> j) & 1],
                                     problem.n)
        pairs[mask] = (value_of(reduced, mask), value_of(problem, parent_mask))
    return pairs
