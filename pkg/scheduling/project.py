"""
Projects, precedence handling and schedule arithmetic.

A project is a set of activities 0..n-1 with immediate precedences; the full
precedence relation is always derived (transitive closure), never supplied.
Durations flow in as vectors (one schedule) or as matrices with one duration
vector per row (many schedules at once, which is how the Monte Carlo code
evaluates coalitions).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from scheduling.errors import CycleError, DomainError
from utils.logger_config import get_logger

logger = get_logger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Project:
    """Activities 0..n-1 plus the immediate precedence pairs (i, j): i before j."""

    n: int
    immediate_prec: FrozenSet[Edge] = field(default_factory=frozenset)
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("a project needs at least one activity")
        edges = frozenset((int(i), int(j)) for i, j in self.immediate_prec)
        for i, j in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DomainError(f"precedence ({i}, {j}) references an unknown activity")
            if i == j:
                raise CycleError([i], f"activity {i} precedes itself")
        object.__setattr__(self, "immediate_prec", edges)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n)))
        elif len(self.labels) != self.n:
            raise DomainError(f"expected {self.n} labels, got {len(self.labels)}")
        else:
            object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))

    @classmethod
    def from_labels(cls, labels: Sequence[str], predecessors: Dict[str, Iterable[str]]) -> "Project":
        """Build a project from external names and a name -> predecessor-names map."""
        index = {str(label): i for i, label in enumerate(labels)}
        if len(index) != len(labels):
            raise DomainError("activity names must be unique")
        edges = set()
        for name, preds in predecessors.items():
            for pred in preds:
                if str(pred) not in index:
                    raise DomainError(f"activity {name!r} has unknown predecessor {pred!r}")
                edges.add((index[str(pred)], index[str(name)]))
        return cls(len(labels), frozenset(edges), tuple(labels))

    @cached_property
    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.immediate_prec)
        return graph

    @cached_property
    def order(self) -> Tuple[int, ...]:
        try:
            return tuple(nx.lexicographical_topological_sort(self.graph))
        except nx.NetworkXUnfeasible:
            cycle = [self.labels[u] for u, _ in nx.find_cycle(self.graph)]
            logger.debug(f"Precedence cycle detected through activities {cycle}")
            raise CycleError(cycle) from None

    @cached_property
    def position(self) -> np.ndarray:
        position = np.empty(self.n, dtype=np.int64)
        position[list(self.order)] = np.arange(self.n)
        return position

    @cached_property
    def pred_index(self) -> Tuple[np.ndarray, ...]:
        preds: List[List[int]] = [[] for _ in range(self.n)]
        for i, j in sorted(self.immediate_prec):
            preds[j].append(i)
        return tuple(np.asarray(p, dtype=np.int64) for p in preds)

    @cached_property
    def closure(self) -> FrozenSet[Edge]:
        _ = self.order  # CycleError surfaces here
        return frozenset(nx.transitive_closure_dag(self.graph).edges())

    @cached_property
    def downstream(self) -> Tuple[Tuple[int, ...], ...]:
        """For each activity: itself plus every successor, in topological order."""
        successors: List[List[int]] = [[i] for i in range(self.n)]
        for i, j in self.closure:
            successors[i].append(j)
        position = self.position
        return tuple(tuple(sorted(s, key=lambda k: position[k])) for s in successors)

    def restrict(self, keep: Sequence[int]) -> "Project":
        """Sub-project on `keep` (in that order) carrying the restricted full relation."""
        keep = list(keep)
        new_id = {old: new for new, old in enumerate(keep)}
        edges = frozenset(
            (new_id[i], new_id[j]) for i, j in self.closure if i in new_id and j in new_id
        )
        return Project(len(keep), edges, tuple(self.labels[k] for k in keep))

    def relabel(self, permutation: Sequence[int]) -> "Project":
        """Activity i of this project becomes activity permutation[i]."""
        perm = list(permutation)
        if sorted(perm) != list(range(self.n)):
            raise DomainError("relabeling must be a permutation of 0..n-1")
        labels = [""] * self.n
        for old, new in enumerate(perm):
            labels[new] = self.labels[old]
        edges = frozenset((perm[i], perm[j]) for i, j in self.immediate_prec)
        return Project(self.n, edges, tuple(labels))


class DelayCost(ABC):
    """
    Delay cost of a duration vector.

    Implementations must be non-negative and non-decreasing in every duration.
    """

    @abstractmethod
    def batch(self, project: Project, durations: np.ndarray) -> np.ndarray:
        """Cost of every row of a (rows, n) duration matrix."""

    def __call__(self, project: Project, y) -> float:
        return float(self.batch(project, as_duration_matrix(project, y))[0])

    def to_spec(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} has no file representation")


@dataclass(frozen=True)
class ThresholdCost(DelayCost):
    """max(makespan - delta, 0): cost grows one-for-one past the delivery date."""

    delta: float

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta < 0:
            raise DomainError(f"threshold delta must be a finite value >= 0, got {self.delta}")

    def batch(self, project: Project, durations: np.ndarray) -> np.ndarray:
        return self.of_makespan(project_durations(project, durations))

    def of_makespan(self, makespans: np.ndarray) -> np.ndarray:
        return np.maximum(makespans - self.delta, 0.0)

    def to_spec(self) -> dict:
        return {"type": "threshold", "delta": float(self.delta)}


def as_duration_vector(project: Project, y) -> np.ndarray:
    vector = np.asarray(y, dtype=float)
    if vector.shape != (project.n,):
        raise DomainError(f"expected {project.n} durations, got shape {vector.shape}")
    if np.any(np.isnan(vector)) or np.any(vector < 0):
        raise DomainError("durations must be non-negative numbers")
    return vector


def as_duration_matrix(project: Project, y) -> np.ndarray:
    matrix = np.asarray(y, dtype=float)
    if matrix.ndim == 1:
        matrix = as_duration_vector(project, matrix)[None, :]
    if matrix.ndim != 2 or matrix.shape[1] != project.n:
        raise DomainError(f"expected rows of {project.n} durations, got shape {matrix.shape}")
    return matrix


def finish_times(project: Project, durations: np.ndarray,
                 finish: Optional[np.ndarray] = None,
                 activities: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Earliest finish times for every row of `durations`.

    With `finish` and `activities` given, only those activities (listed in
    topological order) are recomputed in place; the rest of `finish` must
    already be consistent with `durations`.
    """
    if finish is None:
        finish = np.empty_like(durations, dtype=float)
        activities = project.order
    elif activities is None:
        activities = project.order
    pred_index = project.pred_index
    for i in activities:
        preds = pred_index[i]
        if preds.size == 0:
            finish[:, i] = durations[:, i]
        elif preds.size == 1:
            finish[:, i] = finish[:, preds[0]] + durations[:, i]
        else:
            finish[:, i] = finish[:, preds].max(axis=1) + durations[:, i]
    return finish


def project_durations(project: Project, durations: np.ndarray) -> np.ndarray:
    """Makespan of every row of a (rows, n) duration matrix."""
    return finish_times(project, durations).max(axis=1)


def topological_order(project: Project) -> List[int]:
    """Predecessors first; ties broken by ascending id."""
    return list(project.order)


def transitive_closure(project: Project) -> FrozenSet[Edge]:
    return project.closure


def early_times(project: Project, y) -> np.ndarray:
    """Earliest start of each activity: 0 without predecessors, else the latest predecessor finish."""
    durations = as_duration_matrix(project, y)
    finish = finish_times(project, durations)
    start = np.zeros_like(durations)
    for i in project.order:
        preds = project.pred_index[i]
        if preds.size:
            start[:, i] = finish[:, preds].max(axis=1)
    return start[0]


def project_duration(project: Project, y) -> float:
    """Length of the longest path of the PERT graph under durations y."""
    return float(project_durations(project, as_duration_matrix(project, y))[0])


def delay_cost(cost: DelayCost, project: Project, y) -> float:
    return cost(project, y)
