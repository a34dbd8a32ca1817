"""
Independent non-negative duration distributions and reproducible random streams.

Every distribution samples by inverting its CDF on uniforms drawn from a
numpy Generator, so a given stream always maps to the same durations.
"""

from __future__ import annotations

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

from scheduling.errors import DomainError, ParseError

# Stream domains keep independent purposes from ever sharing a stream
SAMPLE_MATRIX_STREAM = 1
PERMUTATION_STREAM = 2
REALIZATION_STREAM = 3
SEED_DERIVATION_STREAM = 4
SURVEY_STREAM = 5


@dataclass(frozen=True)
class RngStream:
    """A counter-based (Philox) stream identified by (seed, stream_id) within a domain."""

    seed: int
    stream_id: int = 0
    domain: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id", "domain"):
            value = getattr(self, name)
            if not 0 <= int(value) < 2 ** 64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.domain), int(self.stream_id))
        )
        return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, stream_id: int, domain: int = SEED_DERIVATION_STREAM) -> int:
    """A child seed for (seed, stream_id), e.g. the sampling seed of one study run."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(domain), int(stream_id)))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


RandomSource = Union[RngStream, np.random.Generator]


def _generator(rng: RandomSource) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


class DurationDistribution(ABC):
    """Distribution of one activity duration."""

    @abstractmethod
    def mean(self) -> float:
        ...

    @abstractmethod
    def ppf(self, q):
        """Quantile function."""

    @abstractmethod
    def cdf(self, x):
        ...

    @abstractmethod
    def upper(self) -> float:
        """Supremum of the support (inf when unbounded)."""

    @abstractmethod
    def to_spec(self) -> dict:
        ...

    @property
    def is_discrete(self) -> bool:
        return False

    def sample(self, rng: RandomSource, size: Optional[int] = None):
        u = _generator(rng).random(size)
        draws = self.ppf(u)
        return float(draws) if size is None else np.asarray(draws, dtype=float)


@dataclass(frozen=True)
class Point(DurationDistribution):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise DomainError(f"point duration must be >= 0, got {self.value}")

    def mean(self) -> float:
        return float(self.value)

    def ppf(self, q):
        return np.full(np.shape(q), float(self.value))

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0)

    def upper(self) -> float:
        return float(self.value)

    def to_spec(self) -> dict:
        return {"type": "point", "value": float(self.value)}

    @property
    def is_discrete(self) -> bool:
        return True

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([float(self.value)]), np.array([1.0])

    def __str__(self):
        return f"point({self.value:g})"


@dataclass(frozen=True)
class Uniform(DurationDistribution):
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b < math.inf):
            raise DomainError(f"uniform needs 0 <= a < b, got a={self.a}, b={self.b}")

    def mean(self) -> float:
        return (self.a + self.b) / 2

    def ppf(self, q):
        return self.a + (self.b - self.a) * np.asarray(q, dtype=float)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def upper(self) -> float:
        return float(self.b)

    def to_spec(self) -> dict:
        return {"type": "uniform", "a": float(self.a), "b": float(self.b)}

    def __str__(self):
        return f"U({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class Triangular(DurationDistribution):
    """Triangular with (min, mode, max); t(1,2,3) has mean 2."""

    low: float
    mode: float
    high: float

    def __post_init__(self):
        if not (0 <= self.low <= self.mode <= self.high < math.inf and self.low < self.high):
            raise DomainError(
                f"triangular needs 0 <= min <= mode <= max and min < max, "
                f"got ({self.low}, {self.mode}, {self.high})"
            )

    def mean(self) -> float:
        return (self.low + self.mode + self.high) / 3

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        a, c, b = self.low, self.mode, self.high
        split = (c - a) / (b - a)
        left = a + np.sqrt(q * (b - a) * (c - a))
        right = b - np.sqrt((1 - q) * (b - a) * (b - c))
        return np.where(q < split, left, right)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        a, c, b = self.low, self.mode, self.high
        with np.errstate(divide="ignore", invalid="ignore"):
            left = (x - a) ** 2 / ((b - a) * (c - a))
            right = 1 - (b - x) ** 2 / ((b - a) * (b - c))
        return np.select([x <= a, x <= c, x < b], [0.0, left, right], default=1.0)

    def upper(self) -> float:
        return float(self.high)

    def to_spec(self) -> dict:
        return {"type": "triangular", "min": float(self.low), "mode": float(self.mode),
                "max": float(self.high)}

    def __str__(self):
        return f"t({self.low:g},{self.mode:g},{self.high:g})"


@dataclass(frozen=True)
class Exponential(DurationDistribution):
    """
    Exponential with the given rate; exp(1/2) has mean 2.

    Samples are -ln(1 - U)/rate rather than -ln(U)/rate. Both have the same
    law, and the first stays finite for U = 0 (numpy draws U from [0, 1)).
    """

    rate: float

    def __post_init__(self):
        if not (0 < self.rate < math.inf):
            raise DomainError(f"exponential rate must be > 0, got {self.rate}")

    def mean(self) -> float:
        return 1 / self.rate

    def ppf(self, q):
        # -ln(1 - U) keeps U = 0 finite; 1 - U is uniform on (0, 1]
        return -np.log1p(-np.asarray(q, dtype=float)) / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0)), 0.0)

    def upper(self) -> float:
        return math.inf

    def to_spec(self) -> dict:
        return {"type": "exponential", "rate": float(self.rate)}

    def __str__(self):
        return f"exp({self.rate:g})"


@dataclass(frozen=True)
class Discrete(DurationDistribution):
    values: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if not values or len(values) != len(probs):
            raise DomainError("discrete distribution needs matching, non-empty values and probs")
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise DomainError("discrete values must be >= 0")
        if any(not p > 0 for p in probs):
            raise DomainError("discrete probabilities must be > 0")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"discrete probabilities sum to {math.fsum(probs)!r}, not 1")
        order = sorted(range(len(values)), key=lambda k: values[k])
        object.__setattr__(self, "values", tuple(values[k] for k in order))
        object.__setattr__(self, "probs", tuple(probs[k] for k in order))

    @property
    def is_discrete(self) -> bool:
        return True

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array(self.values), np.array(self.probs)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    def ppf(self, q):
        cumulative = np.cumsum(self.probs)
        index = np.searchsorted(cumulative, np.asarray(q, dtype=float), side="right")
        picked = np.asarray(self.values)[np.minimum(index, len(self.values) - 1)]
        return picked if np.ndim(q) else float(picked)

    def cdf(self, x):
        cumulative = np.concatenate([[0.0], np.cumsum(self.probs)])
        index = np.searchsorted(np.asarray(self.values), np.asarray(x, dtype=float), side="right")
        return np.minimum(cumulative[index], 1.0)

    def upper(self) -> float:
        return float(self.values[-1])

    def to_spec(self) -> dict:
        return {"type": "discrete", "values": list(self.values), "probs": list(self.probs)}

    def __str__(self):
        pairs = ";".join(f"{v:g}:{p:g}" for v, p in zip(self.values, self.probs))
        return f"discrete({pairs})"


def sample(dist: DurationDistribution, rng: RandomSource, size: Optional[int] = None):
    """One draw (or `size` draws) of `dist` from `rng`."""
    return dist.sample(rng, size)


def mean(dist: DurationDistribution) -> float:
    return dist.mean()


def discretize(dist: DurationDistribution, k: int) -> Discrete:
    """k equally likely quantile midpoints of a continuous distribution."""
    if dist.is_discrete:
        raise DomainError(f"{dist} is already discrete")
    if k < 2:
        raise DomainError(f"discretize needs k >= 2, got {k}")
    points = dist.ppf((np.arange(k) + 0.5) / k)
    return Discrete(tuple(float(p) for p in points), tuple([1.0 / k] * k))


def from_spec(spec: dict) -> DurationDistribution:
    """Build a distribution from its project-file dictionary."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise DomainError(f"distribution spec must be an object with a 'type', got {spec!r}")
    kind = str(spec["type"]).lower()
    try:
        if kind == "point":
            return Point(float(spec["value"]))
        if kind == "uniform":
            return Uniform(float(spec["a"]), float(spec["b"]))
        if kind == "triangular":
            return Triangular(float(spec["min"]), float(spec["mode"]), float(spec["max"]))
        if kind == "exponential":
            return Exponential(float(spec["rate"]))
        if kind == "discrete":
            return Discrete(tuple(spec["values"]), tuple(spec["probs"]))
    except (KeyError, TypeError) as e:
        raise DomainError(f"incomplete {kind} distribution spec {spec!r}: {e}") from e
    raise DomainError(f"unknown distribution type {spec['type']!r}")


_COMPACT = re.compile(r"^\s*([A-Za-z]+)\s*\((.*)\)\s*$")


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as e:
        raise ParseError(f"not a number: {text!r}") from e


def parse_compact(text: str) -> DurationDistribution:
    """
    Parse the table notation used for project sheets.

    Accepts t(1,2,3), U(0,10), exp(1/2), point(3) or a bare number, and
    discrete(1:0.5;3:0.5). Fractions such as 1/2 are allowed everywhere.
    """
    match = _COMPACT.match(text)
    if match is None:
        return Point(_number(text))
    name, body = match.group(1).lower(), match.group(2)
    if name == "discrete":
        pairs = [item.split(":") for item in body.split(";") if item.strip()]
        if any(len(pair) != 2 for pair in pairs):
            raise ParseError(f"discrete entries must look like value:prob, got {text!r}")
        return Discrete(tuple(_number(v) for v, _ in pairs), tuple(_number(p) for _, p in pairs))
    args = [_number(part) for part in body.split(",")]
    builders = {"t": (Triangular, 3), "tri": (Triangular, 3), "triangular": (Triangular, 3),
                "u": (Uniform, 2), "uniform": (Uniform, 2),
                "exp": (Exponential, 1), "exponential": (Exponential, 1),
                "point": (Point, 1)}
    if name not in builders:
        raise ParseError(f"unknown distribution {name!r} in {text!r}")
    builder, arity = builders[name]
    if len(args) != arity:
        raise ParseError(f"{name} takes {arity} parameters, got {len(args)} in {text!r}")
    return builder(*args)
