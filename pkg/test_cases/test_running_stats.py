import math

import numpy as np

from scheduling.running_stats import RunningStats


def accumulate(rows):
    stats = RunningStats(rows.shape[1])
    for row in rows:
        stats.add(row)
    return stats


def test_matches_numpy():
    rows = np.random.default_rng(0).normal(size=(500, 3))
    stats = accumulate(rows)
    assert np.allclose(stats.mean, rows.mean(axis=0))
    assert np.allclose(stats.variance, rows.var(axis=0, ddof=1))
    assert np.allclose(stats.std_error, rows.std(axis=0, ddof=1) / math.sqrt(500))


def test_merge_equals_single_pass():
    rows = np.random.default_rng(1).exponential(size=(300, 4))
    merged = accumulate(rows[:100]).merge(accumulate(rows[100:]))
    assert merged.count == 300
    assert np.allclose(merged.mean, rows.mean(axis=0))
    assert np.allclose(merged.variance, rows.var(axis=0, ddof=1))


def test_merge_with_empty():
    stats = accumulate(np.ones((3, 2)))
    assert np.array_equal(stats.merge(RunningStats(2)).mean, stats.mean)
    assert np.array_equal(RunningStats(2).merge(stats).mean, stats.mean)


def test_single_observation_has_no_error():
    stats = accumulate(np.array([[1.0, 2.0]]))
    assert np.all(np.isnan(stats.std_error))
