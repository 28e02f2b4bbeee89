"""Marginal distributions on the hypercube, label laws and joint distributions.

Sampling is pure given a :class:`RandomnessStream`.  A joint sample draws
its points with exactly the generator ``sample_marginal`` would use for
the same stream, and its labels from the child stream ``rs.child(1)``, so
the point projection of ``sample_joint`` replays ``sample_marginal``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Concept,
    ConceptClass,
    all_points,
    as_points,
    encode,
    parse_concept,
)
from .errors import ArgumentError, ConfigurationError, SampleBudgetError, SizeCapError
from .streams import RandomnessStream

# uniform/product supports are enumerated only up to this dimension
MAX_EXACT_DIMENSION = 20
_LABEL_STREAM = 1


def _point_string(point) -> str:
    return "".join("+" if v > 0 else "-" for v in point)


def _parse_point(text: str) -> np.ndarray:
    if not text or set(text) - {"+", "-"}:
        raise ConfigurationError(f"bad point literal {text!r}")
    return np.array([1 if ch == "+" else -1 for ch in text], dtype=np.int8)


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------


class MarginalDistribution:
    dimension: int

    def _draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rs: RandomnessStream, count: int) -> np.ndarray:
        if count < 1:
            raise ArgumentError(f"count must be >= 1, got {count}")
        return self._draw(rs.generator(), int(count))

    @property
    def enumerable(self) -> bool:
        return self.dimension <= MAX_EXACT_DIMENSION

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(points, probabilities) over the full support."""
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(MarginalDistribution):
    dimension: int

    def __post_init__(self):
        if not 1 <= self.dimension <= 24:
            raise ConfigurationError(f"dimension must be in [1, 24], got {self.dimension}")

    def _draw(self, rng, count):
        return (1 - 2 * rng.integers(0, 2, size=(count, self.dimension))).astype(np.int8)

    def support(self):
        if not self.enumerable:
            raise SizeCapError(
                f"support of uniform({self.dimension}) is too large; use a Monte Carlo estimator"
            )
        pts = all_points(self.dimension)
        return pts, np.full(pts.shape[0], 2.0 ** -self.dimension)

    def __str__(self):
        return f"uniform({self.dimension})"


@dataclass(frozen=True)
class Product(MarginalDistribution):
    """Independent coordinates with P[x_j = +1] = biases[j]."""

    biases: tuple[float, ...]

    def __post_init__(self):
        b = tuple(float(v) for v in self.biases)
        if not b or any(not 0.0 <= v <= 1.0 for v in b):
            raise ConfigurationError("product biases must be a non-empty vector in [0, 1]")
        object.__setattr__(self, "biases", b)

    @property
    def dimension(self) -> int:
        return len(self.biases)

    def _draw(self, rng, count):
        u = rng.random((count, self.dimension))
        return np.where(u < np.asarray(self.biases), 1, -1).astype(np.int8)

    def support(self):
        if not self.enumerable:
            raise SizeCapError("product support too large; use a Monte Carlo estimator")
        pts = all_points(self.dimension)
        p = np.asarray(self.biases)
        probs = np.prod(np.where(pts > 0, p, 1.0 - p), axis=1)
        return pts, probs

    def __str__(self):
        return f"product([{','.join(repr(v) for v in self.biases)}])"


@dataclass(frozen=True, eq=False)
class Explicit(MarginalDistribution):
    points: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if pts.shape[0] == 0 or probs.shape != (pts.shape[0],):
            raise ConfigurationError("explicit distribution needs one probability per support point")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigurationError("explicit probabilities must be non-negative and sum to 1")
        if len(np.unique(encode(pts))) != pts.shape[0]:
            raise ConfigurationError("explicit support points must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probabilities", probs)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def enumerable(self) -> bool:
        return True

    def _draw(self, rng, count):
        idx = rng.choice(self.points.shape[0], size=count, p=self.probabilities)
        return self.points[idx]

    def support(self):
        return self.points, self.probabilities

    def __str__(self):
        items = ", ".join(
            f"{_point_string(x)}:{float(p)!r}" for x, p in zip(self.points, self.probabilities)
        )
        return f"explicit([{items}])"


def sample_marginal(d: MarginalDistribution, rs: RandomnessStream, count: int) -> np.ndarray:
    return d.sample(rs, count)


# ---------------------------------------------------------------------------
# label laws
# ---------------------------------------------------------------------------


class LabelLaw:
    """Conditional law of the label given the point, via E[y | x]."""

    def mean(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, points: np.ndarray, rs: RandomnessStream) -> np.ndarray:
        u = rs.generator().random(points.shape[0])
        return np.where(u < (1.0 + self.mean(points)) / 2.0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class ConceptNoisy(LabelLaw):
    concept: Concept
    flip: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.flip <= 0.5:
            raise ConfigurationError(f"flip probability must be in [0, 1/2], got {self.flip}")

    def mean(self, points):
        return (1.0 - 2.0 * self.flip) * self.concept.evaluate(points)

    def __str__(self):
        return f'concept_noisy("{self.concept.descriptor}", {self.flip!r})'


@dataclass(frozen=True)
class Rademacher(LabelLaw):
    def mean(self, points):
        return np.zeros(np.asarray(points).shape[0])

    def __str__(self):
        return "rademacher"


@dataclass(frozen=True, eq=False)
class Conditional(LabelLaw):
    """Explicit table mapping each support point to P[y = +1 | x]."""

    dimension: int
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, q in self.table.items():
            code = int(encode(as_points(key, self.dimension))[0]) if not isinstance(key, int) else key
            if not 0.0 <= float(q) <= 1.0:
                raise ConfigurationError("conditional probabilities must lie in [0, 1]")
            clean[code] = float(q)
        object.__setattr__(self, "table", clean)

    @classmethod
    def from_means(cls, points, means) -> "Conditional":
        pts = as_points(points)
        return cls(pts.shape[1], {int(c): (1.0 + float(v)) / 2.0 for c, v in zip(encode(pts), means)})

    def prob_plus(self, points) -> np.ndarray:
        pts = as_points(points, self.dimension)
        codes = encode(pts)
        try:
            return np.array([self.table[int(c)] for c in codes], dtype=np.float64)
        except KeyError as err:
            raise ConfigurationError(
                f"conditional label table has no entry for point code {err.args[0]}"
            ) from None

    def mean(self, points):
        return 2.0 * self.prob_plus(points) - 1.0

    def __str__(self):
        from .core import decode

        items = ", ".join(
            f"{_point_string(decode(code, self.dimension))}:{float(q)!r}"
            for code, q in sorted(self.table.items())
        )
        return f"conditional([{items}])"


# ---------------------------------------------------------------------------
# joint distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointDistribution:
    marginal: MarginalDistribution
    labels: LabelLaw

    @property
    def dimension(self) -> int:
        return self.marginal.dimension

    def sample(self, rs: RandomnessStream, count: int) -> tuple[np.ndarray, np.ndarray]:
        points = self.marginal.sample(rs, count)
        return points, self.labels.sample(points, rs.child(_LABEL_STREAM))

    def support_with_means(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(points, probabilities, E[y|x]) restricted to positive-probability points."""
        pts, probs = self.marginal.support()
        keep = probs > 0
        pts, probs = pts[keep], probs[keep]
        return pts, probs, self.labels.mean(pts)

    @property
    def is_noise(self) -> bool:
        return isinstance(self.labels, Rademacher)

    def __str__(self):
        return f"joint{{marginal={self.marginal}, labels={self.labels}}}"


def noise_joint(marginal: MarginalDistribution) -> JointDistribution:
    """The pure-noise law: points from the marginal, independent fair-coin labels."""
    return JointDistribution(marginal, Rademacher())


def sample_joint(j: JointDistribution, rs: RandomnessStream, count: int):
    return j.sample(rs, count)


def exact_correlation(j: JointDistribution, concept: Concept) -> float:
    """E[c(x) y] by full-support summation."""
    pts, probs, means = j.support_with_means()
    return float(np.dot(probs * means, concept.evaluate(pts)))


def class_correlations(j: JointDistribution, concept_class: ConceptClass) -> np.ndarray:
    pts, probs, means = j.support_with_means()
    return concept_class.evaluate(pts).astype(np.float64) @ (probs * means)


def exact_opt_correlation(j: JointDistribution, concept_class: ConceptClass) -> tuple[float, Concept]:
    """max over the class of the exact correlation, with the lowest-index witness."""
    cors = class_correlations(j, concept_class)
    best = int(np.argmax(cors))
    return float(cors[best]), concept_class[best]


def exact_opt_error(j: JointDistribution, concept_class: ConceptClass) -> float:
    return (1.0 - exact_opt_correlation(j, concept_class)[0]) / 2.0


# ---------------------------------------------------------------------------
# sample access
# ---------------------------------------------------------------------------


class JointSource:
    """Counted sample access to a joint distribution.

    Draw number k uses stream ``rs.child(k)``; ``consumed`` counts every
    example handed out.  An optional budget turns over-consumption into a
    :class:`SampleBudgetError`.
    """

    def __init__(self, joint: JointDistribution, rs: RandomnessStream, budget: int | None = None):
        self.joint = joint
        self.rs = rs
        self.budget = budget
        self.consumed = 0
        self._calls = 0

    @property
    def marginal(self) -> MarginalDistribution:
        return self.joint.marginal

    @property
    def dimension(self) -> int:
        return self.joint.dimension

    def draw(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        count = int(count)
        if count < 1:
            raise ArgumentError(f"count must be >= 1, got {count}")
        if self.budget is not None and self.consumed + count > self.budget:
            raise SampleBudgetError(
                f"source budget {self.budget} exhausted ({self.consumed} used, {count} requested)"
            )
        out = self.joint.sample(self.rs.child(self._calls), count)
        self._calls += 1
        self.consumed += count
        return out

    def exact_joint(self) -> JointDistribution:
        return self.joint


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"


def _split_items(body: str) -> list[str]:
    return [s.strip() for s in body.split(",") if s.strip()]


def parse_marginal(text: str) -> MarginalDistribution:
    s = text.strip()
    if m := re.fullmatch(r"uniform\(\s*(\d+)\s*\)", s):
        return Uniform(int(m.group(1)))
    if m := re.fullmatch(r"product\(\s*\[(.*)\]\s*\)", s):
        return Product(tuple(float(v) for v in _split_items(m.group(1))))
    if m := re.fullmatch(r"explicit\(\s*\[(.*)\]\s*\)", s):
        pts, probs = [], []
        for item in _split_items(m.group(1)):
            point, _, prob = item.partition(":")
            pts.append(_parse_point(point.strip()))
            probs.append(float(prob))
        if not pts:
            raise ConfigurationError("explicit distribution with empty support")
        return Explicit(np.stack(pts), np.array(probs))
    raise ConfigurationError(f"unrecognized marginal {text!r}")


def parse_labels(text: str, dimension: int) -> LabelLaw:
    s = text.strip()
    if s == "rademacher":
        return Rademacher()
    if m := re.fullmatch(r'concept_noisy\(\s*"([^"]+)"\s*,\s*(' + _NUM + r")\s*\)", s):
        return ConceptNoisy(parse_concept(m.group(1), dimension), float(m.group(2)))
    if m := re.fullmatch(r"conditional\(\s*\[(.*)\]\s*\)", s):
        table = {}
        for item in _split_items(m.group(1)):
            point, _, prob = item.partition(":")
            table[int(encode(_parse_point(point.strip())[None, :])[0])] = float(prob)
        return Conditional(dimension, table)
    raise ConfigurationError(f"unrecognized label law {text!r}")


def parse_joint(text: str) -> JointDistribution:
    m = re.fullmatch(r"\s*joint\{\s*marginal=(.*?)\s*,\s*labels=(.*)\}\s*", text)
    if not m:
        raise ConfigurationError(f"unrecognized joint distribution {text!r}")
    marginal = parse_marginal(m.group(1))
    return JointDistribution(marginal, parse_labels(m.group(2), marginal.dimension))

