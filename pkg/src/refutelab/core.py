"""Points, concepts, concept classes, hypotheses and the learner interface.

Points live on the hypercube {+-1}^n and are stored as int8 arrays whose
last axis is the coordinate axis.  Concepts are small frozen objects that
evaluate a whole batch of points at once.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ArgumentError, ConfigurationError, SizeCapError
from .streams import RandomnessStream

MAX_DIMENSION = 24
MAX_CLASS_SIZE = 2**20
# truth tables are materialized only up to this dimension
TABLE_MAX_DIMENSION = 16


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------


def as_points(points, dimension: int | None = None) -> np.ndarray:
    """Validate and return points as an int8 array of shape (N, n)."""
    arr = np.asarray(points)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ArgumentError(f"points must be 1-D or 2-D, got shape {arr.shape}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ArgumentError("every coordinate must be +1 or -1")
    if dimension is not None and arr.shape[1] != dimension:
        raise ConfigurationError(
            f"dimension mismatch: points have n={arr.shape[1]}, expected n={dimension}"
        )
    return arr.astype(np.int8, copy=False)


def encode(points: np.ndarray) -> np.ndarray:
    """Integer code of each point: bit j is set iff coordinate j is -1."""
    return _kernels.encode_points(points)


def all_points(n: int) -> np.ndarray:
    """Every point of {+-1}^n, ordered by code."""
    if not 1 <= n <= MAX_DIMENSION:
        raise ConfigurationError(f"dimension must be in [1, {MAX_DIMENSION}], got {n}")
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def decode(codes, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    bits = (codes[..., None] >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


# ---------------------------------------------------------------------------
# concepts
# ---------------------------------------------------------------------------


def _sign(values: np.ndarray) -> np.ndarray:
    return np.where(values >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class Concept:
    """A deterministic +-1 function on {+-1}^n, identified by its descriptor."""

    dimension: int

    kind = "abstract"

    def _eval(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, points) -> np.ndarray:
        pts = as_points(points, self.dimension)
        return self._eval(pts)

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)

    @property
    def descriptor(self) -> str:
        raise NotImplementedError


def _check_index(index: int, n: int) -> None:
    if not 1 <= index <= n:
        raise ConfigurationError(f"coordinate index {index} outside [1, {n}]")


@dataclass(frozen=True)
class Dictator(Concept):
    index: int = 1
    sign: int = 1

    kind = "dict"

    def __post_init__(self):
        _check_index(self.index, self.dimension)
        if self.sign not in (1, -1):
            raise ConfigurationError("dictator sign must be +1 or -1")

    def _eval(self, points):
        return (self.sign * points[:, self.index - 1]).astype(np.int8)

    @property
    def descriptor(self) -> str:
        return f"dict:{'+' if self.sign > 0 else '-'}{self.index}"


@dataclass(frozen=True)
class Parity(Concept):
    indices: tuple[int, ...] = ()

    kind = "parity"

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        for i in idx:
            _check_index(i, self.dimension)
        object.__setattr__(self, "indices", idx)

    def _eval(self, points):
        if not self.indices:
            return np.ones(points.shape[0], dtype=np.int8)
        cols = points[:, [i - 1 for i in self.indices]]
        return np.prod(cols, axis=1, dtype=np.int8)

    @property
    def descriptor(self) -> str:
        return f"parity:[{','.join(map(str, self.indices))}]"


@dataclass(frozen=True)
class Conjunction(Concept):
    """AND of literals; a literal +i asks x_i = +1, -i asks x_i = -1."""

    literals: tuple[int, ...] = ()

    kind = "conj"

    def __post_init__(self):
        lits = tuple(sorted(set(int(v) for v in self.literals), key=lambda v: (abs(v), -v)))
        variables = [abs(v) for v in lits]
        if 0 in variables or len(set(variables)) != len(variables):
            raise ConfigurationError("conjunction literals must use distinct non-zero variables")
        for v in variables:
            _check_index(v, self.dimension)
        object.__setattr__(self, "literals", lits)

    def _eval(self, points):
        ok = np.ones(points.shape[0], dtype=bool)
        for lit in self.literals:
            ok &= points[:, abs(lit) - 1] == (1 if lit > 0 else -1)
        return np.where(ok, 1, -1).astype(np.int8)

    @property
    def descriptor(self) -> str:
        return "conj:[" + ",".join(f"{'+' if v > 0 else '-'}{abs(v)}" for v in self.literals) + "]"


@dataclass(frozen=True)
class Halfspace(Concept):
    """sign(w.x - t) with sign(0) = +1."""

    weights: tuple[int, ...] = ()
    threshold: int = 0

    kind = "halfspace"

    def __post_init__(self):
        w = tuple(int(v) for v in self.weights)
        if len(w) != self.dimension:
            raise ConfigurationError(
                f"halfspace has {len(w)} weights for dimension {self.dimension}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "threshold", int(self.threshold))

    def _eval(self, points):
        w = np.asarray(self.weights, dtype=np.int64)
        return _sign(points.astype(np.int64) @ w - self.threshold)

    @property
    def descriptor(self) -> str:
        return f"halfspace:w=[{','.join(map(str, self.weights))}];t={self.threshold}"


_INT_LIST = r"\[\s*([+-]?\d+(?:\s*,\s*[+-]?\d+)*)?\s*\]"


def _ints(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(t) for t in text.split(","))


def parse_concept(text: str, dimension: int) -> Concept:
    """Inverse of ``Concept.descriptor``."""
    s = text.strip()
    if m := re.fullmatch(r"dict:([+-])(\d+)", s):
        return Dictator(dimension, int(m.group(2)), 1 if m.group(1) == "+" else -1)
    if m := re.fullmatch(r"parity:" + _INT_LIST, s):
        return Parity(dimension, _ints(m.group(1)))
    if m := re.fullmatch(r"conj:" + _INT_LIST, s):
        return Conjunction(dimension, _ints(m.group(1)))
    if m := re.fullmatch(r"halfspace:w=" + _INT_LIST + r";t=([+-]?\d+)", s):
        return Halfspace(dimension, _ints(m.group(1)), int(m.group(2)))
    raise ConfigurationError(f"unrecognized concept descriptor {text!r}")


def evaluate_concept(concept: Concept, x) -> int:
    """Value of ``concept`` at a single point."""
    pts = as_points(x)
    if pts.shape[0] != 1:
        raise ArgumentError("evaluate_concept takes exactly one point")
    return int(concept.evaluate(pts)[0])


# ---------------------------------------------------------------------------
# concept classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConceptClass:
    name: str
    dimension: int
    concepts: tuple[Concept, ...]

    def __post_init__(self):
        if not self.concepts:
            raise ConfigurationError("a concept class must be non-empty")
        if len(self.concepts) > MAX_CLASS_SIZE:
            raise SizeCapError(f"class size {len(self.concepts)} exceeds {MAX_CLASS_SIZE}")
        if any(c.dimension != self.dimension for c in self.concepts):
            raise ConfigurationError("all concepts in a class must share the dimension")

    def __len__(self) -> int:
        return len(self.concepts)

    def __iter__(self):
        return iter(self.concepts)

    def __getitem__(self, i) -> Concept:
        return self.concepts[i]

    @property
    def descriptors(self) -> list[str]:
        return [c.descriptor for c in self.concepts]

    def index_of(self, concept: Concept) -> int:
        return self.descriptors.index(concept.descriptor)

    @property
    def has_table(self) -> bool:
        return self.dimension <= TABLE_MAX_DIMENSION and len(self) * 2**self.dimension <= 2**26

    @cached_property
    def table(self) -> np.ndarray:
        """Truth table of shape (|class|, 2**n), columns ordered by point code."""
        if not self.has_table:
            raise SizeCapError("truth table too large for this class")
        pts = all_points(self.dimension)
        tab = np.stack([c.evaluate(pts) for c in self.concepts])
        tab.setflags(write=False)
        return tab

    def evaluate(self, points) -> np.ndarray:
        """Matrix of concept values, shape (|class|, N)."""
        pts = as_points(points, self.dimension)
        if self.has_table:
            return self.table[:, encode(pts)]
        return np.stack([c.evaluate(pts) for c in self.concepts])

    @classmethod
    def from_descriptors(cls, descriptors: Sequence[str], dimension: int, name: str = "explicit"):
        return cls(name, dimension, tuple(parse_concept(d, dimension) for d in descriptors))


@dataclass(frozen=True)
class ClassSpec:
    kind: str
    dimension: int
    param: int | None = None

    def __str__(self) -> str:
        if self.kind == "dictators":
            return f"dictators({self.dimension})"
        return f"{self.kind}({self.dimension},{self.param})"


_CLASS_ALIASES = {
    "dictators": "dictators",
    "dictators-with-negations": "dictators",
    "parities": "parities",
    "parities-up-to-degree": "parities",
    "conjunctions": "conjunctions",
    "conjunctions-up-to-size": "conjunctions",
    "halfspaces": "halfspaces",
    "integer-halfspaces": "halfspaces",
}


def parse_class_spec(text: str) -> ClassSpec:
    m = re.fullmatch(r"\s*([a-z-]+)\s*\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*", text)
    if not m or m.group(1) not in _CLASS_ALIASES:
        raise ConfigurationError(f"unrecognized class specification {text!r}")
    kind = _CLASS_ALIASES[m.group(1)]
    param = int(m.group(3)) if m.group(3) is not None else None
    if (kind == "dictators") != (param is None):
        raise ConfigurationError(f"wrong number of parameters in {text!r}")
    return ClassSpec(kind, int(m.group(2)), param)


def class_size(spec: ClassSpec) -> int:
    """Size of the enumerated class (for halfspaces, the raw candidate count)."""
    n, p = spec.dimension, spec.param
    if spec.kind == "dictators":
        return 2 * n
    if spec.kind == "parities":
        return sum(math.comb(n, j) for j in range(min(p, n) + 1))
    if spec.kind == "conjunctions":
        return sum(math.comb(n, j) * 2**j for j in range(min(p, n) + 1))
    return (2 * p + 1) ** n * (2 * n * p + 1)


def enumerate_class(spec: ClassSpec | str) -> ConceptClass:
    """Deterministic enumeration of one of the named concept families."""
    if isinstance(spec, str):
        spec = parse_class_spec(spec)
    n = spec.dimension
    if not 1 <= n <= MAX_DIMENSION:
        raise ConfigurationError(f"dimension must be in [1, {MAX_DIMENSION}], got {n}")
    if spec.param is not None and spec.param < 0:
        raise ConfigurationError("class parameter must be non-negative")
    size = class_size(spec)
    if size > MAX_CLASS_SIZE:
        raise SizeCapError(f"{spec} has {size} members, above the cap {MAX_CLASS_SIZE}")

    if spec.kind == "dictators":
        concepts = [Dictator(n, i, s) for i in range(1, n + 1) for s in (1, -1)]
    elif spec.kind == "parities":
        concepts = [
            Parity(n, subset)
            for j in range(min(spec.param, n) + 1)
            for subset in itertools.combinations(range(1, n + 1), j)
        ]
    elif spec.kind == "conjunctions":
        concepts = [
            Conjunction(n, tuple(v * s for v, s in zip(subset, signs)))
            for j in range(min(spec.param, n) + 1)
            for subset in itertools.combinations(range(1, n + 1), j)
            for signs in itertools.product((1, -1), repeat=j)
        ]
    else:
        if n > TABLE_MAX_DIMENSION:
            raise SizeCapError("halfspace enumeration dedupes by truth table; n <= 16 required")
        W = spec.param
        pts = all_points(n)
        seen: set[bytes] = set()
        concepts = []
        for w in itertools.product(range(-W, W + 1), repeat=n):
            for t in range(-n * W, n * W + 1):
                h = Halfspace(n, w, t)
                key = h.evaluate(pts).tobytes()
                if key not in seen:
                    seen.add(key)
                    concepts.append(h)
    return ConceptClass(str(spec), n, tuple(concepts))


# ---------------------------------------------------------------------------
# hypotheses
# ---------------------------------------------------------------------------


def round_values(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Randomized rounding: +1 with probability (1 + v) / 2."""
    u = rng.random(values.shape)
    return np.where(u < (1.0 + values) / 2.0, 1, -1).astype(np.int8)


class RandomizedHypothesis:
    """A stochastic map from points to +-1.

    ``smoothed`` returns the K-sample average of the hypothesis output (or
    its exact conditional mean when a subclass knows it); ``sample`` draws
    one output per point.  Both are replayable for a fixed stream.
    """

    dimension: int
    budget: int = 1
    deterministic_value = False

    def sample(self, points, rs: RandomnessStream) -> np.ndarray:
        pts = as_points(points, self.dimension)
        v = self.smoothed(pts, rs.child(0))
        return round_values(v, rs.child(1).generator())

    def smoothed(self, points, rs: RandomnessStream | None = None, budget: int | None = None) -> np.ndarray:
        pts = as_points(points, self.dimension)
        k = budget or self.budget
        if rs is None:
            raise ArgumentError("a randomness stream is required for a randomized hypothesis")
        draws = np.stack([self.sample(pts, rs.child(j)) for j in range(k)])
        return draws.mean(axis=0)

    def prob_plus(self, points, rs: RandomnessStream | None = None) -> np.ndarray:
        return (1.0 + self.smoothed(points, rs)) / 2.0


@dataclass(frozen=True)
class ConceptHypothesis(RandomizedHypothesis):
    """A concept viewed as a (degenerate) randomized hypothesis."""

    concept: Concept
    budget: int = 1
    deterministic_value = True

    @property
    def dimension(self) -> int:
        return self.concept.dimension

    def sample(self, points, rs=None) -> np.ndarray:
        return self.concept.evaluate(points)

    def smoothed(self, points, rs=None, budget=None) -> np.ndarray:
        return self.concept.evaluate(points).astype(np.float64)


@dataclass(frozen=True)
class ConstantHypothesis(RandomizedHypothesis):
    dimension: int
    value: float = 1.0
    budget: int = 1
    deterministic_value = True

    def sample(self, points, rs: RandomnessStream | None = None) -> np.ndarray:
        pts = as_points(points, self.dimension)
        if self.value in (1.0, -1.0):
            return np.full(pts.shape[0], int(self.value), dtype=np.int8)
        return round_values(np.full(pts.shape[0], self.value), rs.generator())

    def smoothed(self, points, rs=None, budget=None) -> np.ndarray:
        pts = as_points(points, self.dimension)
        return np.full(pts.shape[0], float(self.value))


@dataclass(frozen=True)
class CoinHypothesis(RandomizedHypothesis):
    """Independent fair coin per evaluation; smoothed value is a K-draw average."""

    dimension: int
    budget: int = 1

    def sample(self, points, rs: RandomnessStream) -> np.ndarray:
        pts = as_points(points, self.dimension)
        return (1 - 2 * rs.generator().integers(0, 2, pts.shape[0])).astype(np.int8)


# ---------------------------------------------------------------------------
# learners
# ---------------------------------------------------------------------------


class AgnosticLearner:
    """Interface: ``train`` maps a labeled sample and an accuracy target to a hypothesis."""

    dimension: int
    declared_time: str = "unspecified"

    def train(self, points, labels, epsilon: float, rs: RandomnessStream) -> RandomizedHypothesis:
        raise NotImplementedError

    def sample_requirement(self, epsilon: float) -> int:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ERMLearner(AgnosticLearner):
    """Brute-force empirical risk minimization over an enumerable class."""

    concept_class: ConceptClass
    declared_time: str = field(default="O(|C| * S)")

    @property
    def dimension(self) -> int:
        return self.concept_class.dimension

    def sample_requirement(self, epsilon: float) -> int:
        # Hoeffding + union bound over |C| concepts, failure probability 1/4
        if not 0 < epsilon <= 1:
            raise ArgumentError(f"epsilon must be in (0, 1], got {epsilon}")
        return math.ceil(8 * (math.log(len(self.concept_class)) + math.log(8)) / epsilon**2)

    def agreements(self, points, labels) -> np.ndarray:
        """sum_i y_i c(x_i) for every concept, in enumeration order."""
        pts = as_points(points, self.dimension)
        y = np.asarray(labels, dtype=np.int8)
        if self.concept_class.has_table:
            return _kernels.agreement(self.concept_class.table, encode(pts), y)
        return self.concept_class.evaluate(pts).astype(np.int64) @ y.astype(np.int64)

    def train(self, points, labels, epsilon: float = 0.1, rs=None) -> ConceptHypothesis:
        labels = np.asarray(labels)
        if labels.size == 0:
            raise ArgumentError("ERM needs a non-empty sample")
        # min empirical error == max agreement; argmax keeps the lowest index on ties
        best = int(np.argmax(self.agreements(points, labels)))
        return ConceptHypothesis(self.concept_class[best])


def erm_learner(concept_class: ConceptClass) -> ERMLearner:
    return ERMLearner(concept_class)
