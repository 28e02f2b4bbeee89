"""Structure-vs-noise refuters and Monte Carlo trial runs.

A refuter takes an m-sample of labeled points and answers STRUCTURE or
NOISE.  ``decide_batch(X, y, rs)[b]`` always equals
``decide(X[b], y[b], rs.child(b))``, which lets deterministic refuters
vectorize over many samples while randomized ones stay replayable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import AgnosticLearner, ConceptClass, as_points, encode
from .distributions import JointDistribution
from .errors import ArgumentError, ConfigurationError, RefuterError
from .estimators import RateReport
from .streams import RandomnessStream


class Verdict(enum.Enum):
    STRUCTURE = "structure"
    NOISE = "noise"

    @classmethod
    def of(cls, structure: bool) -> "Verdict":
        return cls.STRUCTURE if structure else cls.NOISE


class Refuter:
    """Base class.  Subclasses implement ``_base`` (and optionally ``_base_batch``).

    ``randomized`` marks refuters whose base run consumes internal coins;
    majority amplification only changes anything for those.
    """

    m: int
    delta: float
    amplification: int = 1
    randomized: bool = False

    def _base(self, points: np.ndarray, labels: np.ndarray, rs: RandomnessStream) -> tuple[bool, float]:
        raise NotImplementedError

    def _base_batch(self, points, labels, rs) -> tuple[np.ndarray, np.ndarray]:
        out = [self._base(points[b], labels[b], rs.child(b)) for b in range(points.shape[0])]
        return (
            np.array([o[0] for o in out], dtype=bool),
            np.array([o[1] for o in out], dtype=np.float64),
        )

    def _check(self, points, labels) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(points)
        lab = np.asarray(labels)
        if pts.shape[-2] != self.m or lab.shape[-1] != self.m:
            raise ArgumentError(f"refuter expects exactly m={self.m} examples, got {lab.shape[-1]}")
        return pts.astype(np.int8, copy=False), lab.astype(np.int8, copy=False)

    def _amplified(self, points, labels, rs) -> tuple[bool, float]:
        if self.amplification == 1 or not self.randomized:
            return self._base(points, labels, rs)
        runs = [self._base(points, labels, rs.child(k)) for k in range(self.amplification)]
        votes = sum(r[0] for r in runs)
        return 2 * votes > self.amplification, runs[0][1]

    def run(self, points, labels, rs: RandomnessStream | None = None) -> tuple[Verdict, float]:
        """Verdict and the refuter's test statistic on one sample."""
        pts, lab = self._check(points, labels)
        structure, stat = self._amplified(pts, lab, rs or RandomnessStream(0))
        return Verdict.of(structure), stat

    def decide(self, points, labels, rs: RandomnessStream | None = None) -> Verdict:
        return self.run(points, labels, rs)[0]

    def run_batch(self, points, labels, rs: RandomnessStream | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Boolean STRUCTURE flags and statistics for a stack of samples (B, m, n)."""
        pts, lab = self._check(points, labels)
        rs = rs or RandomnessStream(0)
        if self.amplification == 1 or not self.randomized:
            return self._base_batch(pts, lab, rs)
        out = [self._amplified(pts[b], lab[b], rs.child(b)) for b in range(pts.shape[0])]
        return (
            np.array([o[0] for o in out], dtype=bool),
            np.array([o[1] for o in out], dtype=np.float64),
        )

    def decide_batch(self, points, labels, rs: RandomnessStream | None = None) -> np.ndarray:
        return self.run_batch(points, labels, rs)[0]

    @property
    def sample_size(self) -> int:
        return self.m


def _check_amplification(r: int) -> None:
    if r < 1 or r % 2 == 0:
        raise ConfigurationError(f"amplification must be an odd count >= 1, got {r}")


def correlation_sample_bound(class_size: int, delta: float) -> int:
    """m making the noise-regime sup correlation < delta/2 w.p. >= 5/6 (Hoeffding + union)."""
    return math.ceil(32 * (math.log(class_size) + math.log(6)) / delta**2)


@dataclass(frozen=True, eq=False)
class CorrelationRefuter(Refuter):
    """STRUCTURE iff some concept's empirical correlation with the labels is >= delta/2."""

    concept_class: ConceptClass
    delta: float
    m: int
    amplification: int = 1
    enforce_sample_bound: bool = True

    randomized = False

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ConfigurationError(f"delta must be in (0, 1], got {self.delta}")
        _check_amplification(self.amplification)
        need = correlation_sample_bound(len(self.concept_class), self.delta)
        if self.enforce_sample_bound and self.m < need:
            raise ConfigurationError(
                f"correlation refuter needs m >= {need} for |C|={len(self.concept_class)}, "
                f"delta={self.delta}; got m={self.m}"
            )

    def _sums(self, points, labels):
        cls = self.concept_class
        if cls.has_table:
            return _kernels.max_correlation(cls.table, encode(points), labels)
        flat = points.reshape(-1, points.shape[-1])
        vals = cls.evaluate(flat).reshape(len(cls), *points.shape[:-1]).astype(np.int64)
        return (vals * labels.astype(np.int64)).sum(axis=-1).max(axis=0)

    def _decide_sums(self, sums):
        return 2 * sums >= self.delta * self.m - 1e-9

    def _base(self, points, labels, rs):
        sums = self._sums(points[None], labels[None])
        return bool(self._decide_sums(sums)[0]), float(sums[0] / self.m)

    def _base_batch(self, points, labels, rs):
        sums = self._sums(points, labels)
        return self._decide_sums(sums), sums / self.m


def correlation_refuter(
    concept_class: ConceptClass,
    delta: float,
    m: int,
    amplification: int = 1,
    enforce_sample_bound: bool = True,
) -> CorrelationRefuter:
    return CorrelationRefuter(concept_class, delta, int(m), amplification, enforce_sample_bound)


@dataclass(frozen=True, eq=False)
class LearnerRefuter(Refuter):
    """Train on the first half, test the hypothesis' correlation on the second half."""

    learner: AgnosticLearner
    delta: float
    amplification: int = 1

    randomized = True

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ConfigurationError(f"delta must be in (0, 1], got {self.delta}")
        _check_amplification(self.amplification)

    @property
    def half(self) -> int:
        return self.learner.sample_requirement(self.delta / 4) + math.ceil(64 / self.delta**2)

    @property
    def m(self) -> int:
        return 2 * self.half

    def _base(self, points, labels, rs):
        half = self.half
        try:
            h = self.learner.train(points[:half], labels[:half], self.delta / 4, rs.child(0))
        except Exception as err:  # any learner failure voids the trial
            raise RefuterError(f"wrapped learner failed: {err}") from err
        predictions = h.sample(points[half:], rs.child(1))
        cor = float(np.mean(labels[half:].astype(np.float64) * predictions))
        return cor >= self.delta / 2, cor


def learner_to_refuter(learner: AgnosticLearner, delta: float, amplification: int = 1) -> LearnerRefuter:
    return LearnerRefuter(learner, delta, amplification)


@dataclass(frozen=True)
class ConstantRefuter(Refuter):
    """Stub that ignores its input."""

    m: int
    structure: bool = True
    delta: float = 1.0
    amplification: int = 1

    def _base(self, points, labels, rs):
        return self.structure, float("nan")

    def _base_batch(self, points, labels, rs):
        b = points.shape[0]
        return np.full(b, self.structure), np.full(b, np.nan)


@dataclass(frozen=True)
class CoinRefuter(Refuter):
    """Stub answering STRUCTURE with probability p from its internal coins."""

    m: int
    p: float = 0.5
    delta: float = 1.0
    amplification: int = 1

    randomized = True

    def __post_init__(self):
        _check_amplification(self.amplification)

    def _base(self, points, labels, rs):
        return bool(rs.generator().random() < self.p), float("nan")


# ---------------------------------------------------------------------------
# trial runs
# ---------------------------------------------------------------------------


@dataclass
class TrialReport:
    regime: str
    structure: RateReport
    failures: int
    log: list[dict] = field(default_factory=list)

    @property
    def structure_rate(self) -> float:
        return self.structure.rate

    @property
    def noise(self) -> RateReport:
        return RateReport(self.structure.count - self.structure.successes, self.structure.count, self.structure.level)

    @property
    def noise_rate(self) -> float:
        return self.noise.rate

    @property
    def statistics(self) -> np.ndarray:
        return np.array([row["statistic"] for row in self.log if row["verdict"] != "failed"])

    def to_json(self) -> dict:
        return {
            "regime": self.regime,
            "structure": self.structure.to_json(),
            "noise": self.noise.to_json(),
            "failures": self.failures,
        }

    CSV_FIELDS = ("trial", "regime", "verdict", "statistic", "seed_path")


def run_refuter_trials(
    refuter: Refuter,
    joint: JointDistribution,
    trials: int,
    rs: RandomnessStream,
    regime: str | None = None,
) -> TrialReport:
    """Run the refuter on ``trials`` independent m-samples from ``joint``.

    Trial t draws its sample from ``rs.child(t, 0)`` and runs the refuter
    with ``rs.child(t, 1)``.  Trials whose refuter raises RefuterError are
    logged as failed and excluded from the rates.
    """
    if trials < 1:
        raise ArgumentError("trials must be >= 1")
    regime = regime or ("noise" if joint.is_noise else "structure")
    m = refuter.m
    samples = [joint.sample(rs.child(t, 0), m) for t in range(trials)]

    if refuter.randomized:
        results = []
        for t, (pts, lab) in enumerate(samples):
            try:
                verdict, stat = refuter.run(pts, lab, rs.child(t, 1))
                results.append((verdict.value, stat))
            except RefuterError:
                results.append(("failed", float("nan")))
    else:
        pts = np.stack([s[0] for s in samples])
        lab = np.stack([s[1] for s in samples])
        flags, stats = refuter.run_batch(pts, lab)
        results = [(Verdict.of(bool(f)).value, float(s)) for f, s in zip(flags, stats)]

    log = [
        {
            "trial": t,
            "regime": regime,
            "verdict": verdict,
            "statistic": stat,
            "seed_path": rs.child(t).path_string(),
        }
        for t, (verdict, stat) in enumerate(results)
    ]
    structure = sum(1 for v, _ in results if v == "structure")
    failures = sum(1 for v, _ in results if v == "failed")
    return TrialReport(regime, RateReport(structure, trials - failures), failures, log)
