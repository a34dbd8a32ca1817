import numpy as np
import pytest

from scheduling.errors import CycleError, DomainError
from scheduling.project import (
    Project,
    ThresholdCost,
    delay_cost,
    early_times,
    finish_times,
    project_duration,
    project_durations,
    topological_order,
    transitive_closure,
)
from test_cases.conftest import random_project

EXAMPLE2_ACTUAL = [2.5, 1.25, 2, 4.5, 3]


def longest_path_brute_force(project: Project, y) -> float:
    """Max over all source-to-sink paths of the summed durations."""
    succ = {i: [j for a, j in project.immediate_prec if a == i] for i in range(project.n)}
    has_pred = {j for _, j in project.immediate_prec}

    def walk(i):
        if not succ[i]:
            return y[i]
        return y[i] + max(walk(j) for j in succ[i])

    return max(walk(i) for i in range(project.n) if i not in has_pred)


def test_topological_order_example2(example2_project):
    order = topological_order(example2_project)
    assert order == [0, 1, 2, 3, 4]
    position = {a: k for k, a in enumerate(order)}
    for i, j in transitive_closure(example2_project):
        assert position[i] < position[j]


def test_topological_order_ties_by_id():
    assert topological_order(Project(3)) == [0, 1, 2]
    assert topological_order(Project(4, frozenset({(3, 0)}))) == [1, 2, 3, 0]


def test_cycle_is_reported():
    with pytest.raises(CycleError) as excinfo:
        topological_order(Project(2, frozenset({(0, 1), (1, 0)})))
    assert sorted(excinfo.value.cycle) == ["0", "1"]


def test_self_loop_rejected():
    with pytest.raises(CycleError):
        Project(2, frozenset({(1, 1)}))


def test_unknown_activity_rejected():
    with pytest.raises(DomainError):
        Project(2, frozenset({(0, 2)}))


def test_transitive_closure(example2_project):
    assert transitive_closure(example2_project) == {(0, 1), (0, 3), (0, 4), (2, 3), (1, 4)}
    assert transitive_closure(Project(3)) == frozenset()
    assert transitive_closure(Project(3, frozenset({(0, 1), (1, 2)}))) == {(0, 1), (1, 2), (0, 2)}


def test_early_times(example2_project):
    assert np.allclose(early_times(example2_project, EXAMPLE2_ACTUAL), [0, 2.5, 0, 2.5, 3.75])
    assert np.array_equal(early_times(example2_project, np.zeros(5)), np.zeros(5))
    chain = Project(3, frozenset({(0, 1), (1, 2)}))
    assert np.allclose(early_times(chain, [1, 2, 5]), [0, 1, 3])


def test_project_duration(example2_project):
    assert project_duration(example2_project, EXAMPLE2_ACTUAL) == pytest.approx(7)
    assert project_duration(example2_project, [2, 1, 1, 4, 2]) == pytest.approx(6)
    assert project_duration(Project(1), [4.2]) == pytest.approx(4.2)


def test_delay_cost(example2_project):
    cost = ThresholdCost(6.5)
    assert delay_cost(cost, example2_project, EXAMPLE2_ACTUAL) == pytest.approx(0.5)
    assert delay_cost(cost, example2_project, [2, 1, 1, 4, 2]) == 0
    assert delay_cost(ThresholdCost(6), Project(2), [7, 7]) == pytest.approx(1)


def test_negative_durations_rejected(example2_project):
    with pytest.raises(DomainError):
        project_duration(example2_project, [1, 1, -1, 1, 1])
    with pytest.raises(DomainError):
        project_duration(example2_project, [1, 1, 1])
    with pytest.raises(DomainError):
        ThresholdCost(-1)


def test_makespan_matches_path_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(1, 13))
        project = random_project(rng, n)
        y = rng.uniform(0, 10, size=n)
        assert project_duration(project, y) == pytest.approx(longest_path_brute_force(project, y))


def test_vectorized_makespan_matches_rows():
    rng = np.random.default_rng(5)
    project = random_project(rng, 9)
    rows = rng.uniform(0, 4, size=(50, 9))
    batch = project_durations(project, rows)
    assert np.allclose(batch, [project_duration(project, row) for row in rows])


def test_early_times_invariant_under_relabeling():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        project = random_project(rng, n)
        y = rng.uniform(0, 5, size=n)
        perm = rng.permutation(n)
        relabeled = project.relabel(perm)
        y_relabeled = np.empty(n)
        y_relabeled[perm] = y
        e = early_times(project, y)
        e_relabeled = early_times(relabeled, y_relabeled)
        assert np.allclose(e_relabeled[perm], e)


def test_cost_is_monotone_and_non_negative():
    rng = np.random.default_rng(8)
    project = random_project(rng, 8)
    cost = ThresholdCost(6)
    for _ in range(100):
        y = rng.uniform(0, 4, size=8)
        z = y + rng.uniform(0, 1, size=8) * (rng.random(8) < 0.5)
        assert 0 <= cost(project, y) <= cost(project, z)


def test_incremental_finish_times_match_full_recompute():
    rng = np.random.default_rng(21)
    project = random_project(rng, 10)
    rows = rng.uniform(0, 3, size=(30, 10))
    finish = finish_times(project, rows)
    for i in rng.permutation(10):
        rows[:, i] = 5.0
        finish_times(project, rows, finish, project.downstream[i])
        assert np.array_equal(finish, finish_times(project, rows))


def test_downstream_lists_successors_in_order(example2_project):
    assert example2_project.downstream[0] == (0, 1, 3, 4)
    assert example2_project.downstream[2] == (2, 3)
    assert example2_project.downstream[4] == (4,)


def test_restrict_keeps_full_relation(example2_project):
    restricted = example2_project.restrict([0, 2, 3, 4])
    # 0 -> 4 ran only through the removed activity 1
    assert (0, 3) in restricted.immediate_prec
    assert restricted.labels == ("0", "2", "3", "4")


def test_from_labels():
    project = Project.from_labels(["a", "b", "c"], {"b": ["a"], "c": ["a", "b"]})
    assert project.immediate_prec == {(0, 1), (0, 2), (1, 2)}
    with pytest.raises(DomainError):
        Project.from_labels(["a", "b"], {"b": ["z"]})
    with pytest.raises(DomainError):
        Project.from_labels(["a", "a"], {})

