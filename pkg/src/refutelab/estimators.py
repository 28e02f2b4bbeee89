"""Monte Carlo and exact estimation: intervals, correlations, Rademacher complexity."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

from .core import ConceptClass, RandomizedHypothesis
from .distributions import JointDistribution, MarginalDistribution
from .errors import ArgumentError, SizeCapError
from .streams import RandomnessStream

DEFAULT_LEVEL = 0.95
# exact Rademacher enumerates at most this many sign vectors and x-tuples
MAX_SIGN_VECTORS = 2**20
MAX_X_TUPLES = 2**16


@dataclass(frozen=True)
class Estimate:
    value: float
    radius: float
    level: float = DEFAULT_LEVEL
    count: int = 1
    mode: str = "monte-carlo"

    def __post_init__(self):
        if self.radius < 0 or self.count < 1:
            raise ArgumentError("an estimate needs radius >= 0 and count >= 1")

    @property
    def interval(self) -> tuple[float, float]:
        return self.value - self.radius, self.value + self.radius

    def contains(self, x: float) -> bool:
        lo, hi = self.interval
        return lo <= x <= hi

    def to_json(self) -> dict:
        return asdict(self)


def hoeffding_radius(count: int, level: float = DEFAULT_LEVEL, width: float = 2.0) -> float:
    """Two-sided Hoeffding half-width for the mean of ``count`` variables of range ``width``."""
    return width * math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * count))


def _z(level: float) -> float:
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def wilson_interval(successes: int, count: int, level: float = DEFAULT_LEVEL) -> tuple[float, float]:
    if count <= 0:
        return 0.0, 1.0
    z = _z(level)
    p = successes / count
    denom = 1.0 + z * z / count
    center = (p + z * z / (2 * count)) / denom
    half = z * math.sqrt(p * (1 - p) / count + z * z / (4 * count * count)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class RateReport:
    """successes out of count, with a Wilson interval."""

    successes: int
    count: int
    level: float = DEFAULT_LEVEL

    @property
    def rate(self) -> float:
        return self.successes / self.count if self.count else float("nan")

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.count, self.level)

    @property
    def stderr(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.count) if self.count else float("inf")

    def to_json(self) -> dict:
        lo, hi = self.interval
        return {
            "successes": self.successes,
            "count": self.count,
            "rate": self.rate,
            "wilson_low": lo,
            "wilson_high": hi,
            "level": self.level,
        }


def compare_rates(a: RateReport, b: RateReport, level: float = 0.05) -> str:
    """Two-proportion z-test; returns "a>b", "b>a" or "indistinguishable"."""
    for r in (a, b):
        if r.count < 30 or not 0 <= r.successes <= r.count:
            raise ArgumentError("compare_rates needs counts >= 30 and 0 <= successes <= count")
    pooled = (a.successes + b.successes) / (a.count + b.count)
    se = math.sqrt(pooled * (1 - pooled) * (1 / a.count + 1 / b.count))
    if se == 0.0:
        return "indistinguishable"
    z = (a.rate - b.rate) / se
    crit = NormalDist().inv_cdf(1 - level / 2)
    if z > crit:
        return "a>b"
    if z < -crit:
        return "b>a"
    return "indistinguishable"


def estimate_correlation(
    h: RandomizedHypothesis,
    j: JointDistribution,
    count: int,
    K: int = 1,
    rs: RandomnessStream | None = None,
    level: float = DEFAULT_LEVEL,
) -> Estimate:
    """Mean of y * v(x) over fresh draws, v the K-smoothed hypothesis value."""
    if count < 2:
        raise ArgumentError("estimate_correlation needs count >= 2")
    rs = rs or RandomnessStream(0)
    points, labels = j.sample(rs.child(0), count)
    values = h.smoothed(points, rs.child(1), budget=K)
    return Estimate(
        float(np.mean(labels * values)), hoeffding_radius(count, level), level, count, "hoeffding"
    )


# ---------------------------------------------------------------------------
# Rademacher complexity
# ---------------------------------------------------------------------------


def sign_vectors(m: int) -> np.ndarray:
    """All 2**m vectors in {+-1}^m, shape (2**m, m)."""
    codes = np.arange(2**m, dtype=np.int64)
    return (1 - 2 * ((codes[:, None] >> np.arange(m)) & 1)).astype(np.int64)


def _sup_over_signs(values: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """values (T, C, m); returns (T,) sums over sigma of max_c sum_i sigma_i c(x_i)."""
    out = np.empty(values.shape[0], dtype=np.int64)
    for t in range(values.shape[0]):
        out[t] = (values[t] @ sigmas.T).max(axis=0).sum()
    return out


def rademacher_complexity(
    concept_class: ConceptClass,
    d: MarginalDistribution,
    m: int,
    mode: str = "exact",
    trials: int = 10_000,
    rs: RandomnessStream | None = None,
) -> Estimate:
    """E_x E_sigma [ (1/m) sup_c sum_i sigma_i c(x_i) ].

    ``mode="exact"`` enumerates every sign vector; the x-tuples are
    enumerated too when the support allows at most 2**16 of them, otherwise
    ``trials`` x-tuples are sampled (reported as mode "exact-sigma").
    ``mode="monte-carlo"`` samples ``trials`` (x-tuple, sign-vector) pairs.
    """
    if m < 1:
        raise ArgumentError("m must be >= 1")
    if concept_class.dimension != d.dimension:
        raise ArgumentError("class and distribution dimensions differ")
    rs = rs or RandomnessStream(0)

    if mode == "monte-carlo":
        sums = np.empty(trials, dtype=np.int64)
        for t in range(trials):
            pts = d.sample(rs.child(t, 0), m)
            sig = 1 - 2 * rs.child(t, 1).generator().integers(0, 2, m)
            sums[t] = (concept_class.evaluate(pts).astype(np.int64) @ sig).max()
        return Estimate(float(sums.mean() / m), hoeffding_radius(trials), DEFAULT_LEVEL, trials, "monte-carlo")
    if mode != "exact":
        raise ArgumentError(f"unknown mode {mode!r}")

    if 2**m > MAX_SIGN_VECTORS:
        raise SizeCapError(f"exact mode enumerates 2**{m} sign vectors; above the cap")
    sigmas = sign_vectors(m)

    support_size = None
    if d.enumerable:
        pts, probs = d.support()
        keep = probs > 0
        pts, probs = pts[keep], probs[keep]
        support_size = pts.shape[0]
    if support_size is not None and support_size**m <= MAX_X_TUPLES:
        table = concept_class.evaluate(pts).astype(np.int64)  # (C, S)
        total = 0.0
        count = 0
        tuples = np.array(list(itertools.product(range(support_size), repeat=m)), dtype=np.int64)
        chunk = 1024
        for start in range(0, tuples.shape[0], chunk):
            idx = tuples[start : start + chunk]
            vals = np.transpose(table[:, idx], (1, 0, 2))  # (T, C, m)
            weights = np.prod(probs[idx], axis=1)
            total += float(np.dot(weights, _sup_over_signs(vals, sigmas)))
            count += idx.shape[0]
        value = total / (2**m * m)
        return Estimate(value, 0.0, 1.0, count * 2**m, "exact")

    sums = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        vals = concept_class.evaluate(d.sample(rs.child(t), m)).astype(np.int64)
        sums[t] = _sup_over_signs(vals[None], sigmas)[0]
    values = sums / (2**m * m)
    return Estimate(float(values.mean()), hoeffding_radius(trials), DEFAULT_LEVEL, trials, "exact-sigma")
