import math

import numpy as np
import pytest
from scipy import stats

from scheduling.distributions import (
    Discrete,
    Exponential,
    Point,
    RngStream,
    Triangular,
    Uniform,
    derive_seed,
    discretize,
    from_spec,
    mean,
    parse_compact,
    sample,
)
from scheduling.errors import DomainError, ParseError

EXAMPLE2_DISTS = (
    Triangular(1, 2, 3),
    Triangular(0.5, 1, 1.5),
    Triangular(0.25, 0.5, 2.25),
    Triangular(3, 4, 5),
    Exponential(0.5),
)


def test_point_sample():
    assert sample(Point(3.5), RngStream(1)) == 3.5
    assert np.all(sample(Point(3.5), RngStream(1), 10) == 3.5)


def test_uniform_sample_mean_and_support():
    draws = sample(Uniform(2, 8), RngStream(42), 10 ** 6)
    assert abs(draws.mean() - 5) < 0.01
    assert draws.min() >= 2 and draws.max() <= 8


def test_exponential_sample_mean():
    draws = sample(Exponential(0.5), RngStream(42, 3), 10 ** 6)
    assert abs(draws.mean() - 2) < 0.02
    assert draws.min() >= 0


def test_triangular_support():
    draws = sample(Triangular(0.25, 0.5, 2.25), RngStream(9), 10 ** 5)
    assert draws.min() >= 0.25 and draws.max() <= 2.25


def test_means():
    assert [mean(d) for d in EXAMPLE2_DISTS] == pytest.approx([2, 1, 1, 4, 2])
    assert mean(Uniform(0, 10)) == 5
    assert mean(Discrete((1, 3), (0.5, 0.5))) == 2
    assert mean(Point(4)) == 4


@pytest.mark.parametrize("dist", [Uniform(0, 10), Triangular(1, 2, 3), Triangular(0.25, 0.5, 2.25),
                                  Triangular(0, 0, 1), Exponential(0.5)])
def test_kolmogorov_smirnov(dist):
    draws = sample(dist, RngStream(2024, 7), 10 ** 5)
    result = stats.kstest(draws, dist.cdf)
    assert result.pvalue > 0.01


def test_streams_are_reproducible_and_distinct():
    a = sample(Uniform(0, 1), RngStream(5, 1), 100)
    b = sample(Uniform(0, 1), RngStream(5, 1), 100)
    c = sample(Uniform(0, 1), RngStream(5, 2), 100)
    d = sample(Uniform(0, 1), RngStream(5, 1, domain=3), 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_derive_seed():
    assert derive_seed(7, 3) == derive_seed(7, 3)
    assert derive_seed(7, 3) != derive_seed(7, 4)
    assert 0 <= derive_seed(7, 3) < 2 ** 64


def test_stream_rejects_negative_seed():
    with pytest.raises(DomainError):
        RngStream(-1)


def test_discretize_uniform():
    d = discretize(Uniform(0, 10), 5)
    assert d.values == pytest.approx((1, 3, 5, 7, 9))
    assert d.probs == pytest.approx((0.2,) * 5)


def test_discretize_exponential():
    d = discretize(Exponential(0.5), 4)
    expected = [-2 * math.log(1 - (i + 0.5) / 4) for i in range(4)]
    assert d.values == pytest.approx(expected)
    assert d.probs == pytest.approx((0.25,) * 4)


@pytest.mark.parametrize("dist", [Uniform(2, 8)] + list(EXAMPLE2_DISTS))
def test_discretize_mean_converges(dist):
    assert abs(mean(discretize(dist, 1000)) - mean(dist)) < 0.01 * mean(dist)


def test_discretize_rejects_discrete():
    with pytest.raises(DomainError):
        discretize(Point(1), 3)
    with pytest.raises(DomainError):
        discretize(Discrete((1, 2), (0.5, 0.5)), 3)
    with pytest.raises(DomainError):
        discretize(Uniform(0, 1), 1)


def test_discrete_sampling_frequencies():
    d = Discrete((3, 1), (0.25, 0.75))
    assert d.values == (1, 3)
    draws = sample(d, RngStream(3), 10 ** 5)
    assert set(np.unique(draws)) == {1.0, 3.0}
    assert abs(np.mean(draws == 1.0) - 0.75) < 0.01


@pytest.mark.parametrize("build", [
    lambda: Point(-1),
    lambda: Uniform(5, 5),
    lambda: Uniform(-1, 2),
    lambda: Triangular(1, 4, 3),
    lambda: Triangular(2, 2, 2),
    lambda: Exponential(0),
    lambda: Discrete((1, 2), (0.5, 0.4)),
    lambda: Discrete((1, -2), (0.5, 0.5)),
    lambda: Discrete((), ()),
])
def test_invalid_distributions(build):
    with pytest.raises(DomainError):
        build()


def test_parse_compact():
    assert parse_compact("t(1/4,1/2,9/4)") == Triangular(0.25, 0.5, 2.25)
    assert parse_compact("exp(1/2)") == Exponential(0.5)
    assert parse_compact("U(0,10)") == Uniform(0, 10)
    assert parse_compact("point(3)") == Point(3)
    assert parse_compact("2.5") == Point(2.5)
    assert parse_compact("discrete(1:0.5;3:0.5)") == Discrete((1, 3), (0.5, 0.5))


@pytest.mark.parametrize("text", ["t(1,2)", "beta(1,2)", "exp(a)", "discrete(1;2)", "fast"])
def test_parse_compact_errors(text):
    with pytest.raises(ParseError):
        parse_compact(text)


def test_spec_round_trip():
    for dist in EXAMPLE2_DISTS + (Uniform(0, 10), Point(3), Discrete((1, 3), (0.5, 0.5))):
        assert from_spec(dist.to_spec()) == dist


def test_from_spec_errors():
    with pytest.raises(DomainError):
        from_spec({"type": "gamma", "k": 2})
    with pytest.raises(DomainError):
        from_spec({"type": "uniform", "a": 1})


def test_triangular_quantiles_invert_cdf():
    d = Triangular(0.25, 0.5, 2.25)
    q = np.linspace(0.01, 0.99, 50)
    assert np.allclose(d.cdf(d.ppf(q)), q)
