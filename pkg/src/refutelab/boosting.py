"""Distribution-specific agnostic boosting by label relabeling.

Round t keeps the score H(x) = sum_s eta * v_s(x) of the components found
so far and hands the weak learner a *relabeled source*: pairs (x, y) are
drawn from D' and weighted by w(x, y) = min(1, exp(-y H(x))).

  flip   (default) the pair is emitted with its label kept with
         probability (1 + w) / 2 and negated otherwise, so the x-marginal
         stays exactly D and E'[y | x] = E[y w(x, y) | x].
  reject the pair is accepted with probability w; this changes the
         x-marginal whenever w depends on x.

The booster never synthesizes points: every emitted point is a point the
base source produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConceptClass, RandomizedHypothesis, as_points, decode, encode
from .distributions import Conditional, Explicit, JointDistribution, exact_opt_correlation
from .errors import ArgumentError, BoostFailure, ConfigurationError, RefuteLabError
from .estimators import RateReport
from .streams import RandomnessStream

RELABEL_MODES = ("flip", "reject")
POTENTIAL = "exp-min1"
_DENSE_MAX_DIM = 20


@dataclass(frozen=True)
class BoostConfig:
    epsilon: float
    gamma: float
    alpha: float = 0.0
    rounds: int | None = None
    round_sample: int | None = None
    eta: float | None = None
    c_T: float = 2.0
    relabel_mode: str = "flip"
    potential: str = POTENTIAL
    max_skip_fraction: float = 0.25

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ConfigurationError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if self.relabel_mode not in RELABEL_MODES:
            raise ConfigurationError(f"relabel_mode must be one of {RELABEL_MODES}")
        if self.potential != POTENTIAL:
            raise ConfigurationError(f"only the {POTENTIAL!r} potential is implemented")

    @property
    def T(self) -> int:
        if self.rounds is not None:
            return int(self.rounds)
        return math.ceil(self.c_T / (self.gamma**2 * self.epsilon**2) - 1e-9)

    @property
    def step(self) -> float:
        return self.eta if self.eta is not None else self.gamma / 2.0

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "rounds": self.T,
            "round_sample": self.round_sample,
            "eta": self.step,
            "c_T": self.c_T,
            "relabel_mode": self.relabel_mode,
            "potential": self.potential,
        }


class ScoreBook:
    """Cached score H(x) = sum_s weight_s * v_s(x) keyed by point code.

    Each component is evaluated once per distinct point; later lookups hit
    the cache.  This pins a randomized component's smoothed value at every
    point the first time it is needed.
    """

    def __init__(self, dimension: int, rs: RandomnessStream | None = None):
        self.n = dimension
        self.rs = rs or RandomnessStream(0)
        self.components: list[tuple[RandomizedHypothesis, float]] = []
        if dimension <= _DENSE_MAX_DIM:
            self._score = np.zeros(2**dimension)
            self._known = np.zeros(2**dimension, dtype=bool)
        else:
            self._dict: dict[int, float] = {}
        self._evals = 0

    def _component_values(self, index: int, codes: np.ndarray) -> np.ndarray:
        h, weight = self.components[index]
        self._evals += 1
        return weight * h.smoothed(decode(codes, self.n), self.rs.child(index, self._evals))

    def _known_codes(self) -> np.ndarray:
        if self.n <= _DENSE_MAX_DIM:
            return np.flatnonzero(self._known)
        return np.fromiter(self._dict.keys(), dtype=np.int64, count=len(self._dict))

    def add(self, h: RandomizedHypothesis, weight: float) -> None:
        self.components.append((h, float(weight)))
        codes = self._known_codes()
        if codes.size == 0:
            return
        vals = self._component_values(len(self.components) - 1, codes)
        if self.n <= _DENSE_MAX_DIM:
            self._score[codes] += vals
        else:
            for c, v in zip(codes, vals):
                self._dict[int(c)] += float(v)

    def scores(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        if self.n <= _DENSE_MAX_DIM:
            new = np.unique(codes[~self._known[codes]])
            if new.size:
                total = np.zeros(new.size)
                for i in range(len(self.components)):
                    total += self._component_values(i, new)
                self._score[new] = total
                self._known[new] = True
            return self._score[codes]
        missing = np.unique([c for c in codes if int(c) not in self._dict]).astype(np.int64)
        if missing.size:
            total = np.zeros(missing.size)
            for i in range(len(self.components)):
                total += self._component_values(i, missing)
            self._dict.update({int(c): float(v) for c, v in zip(missing, total)})
        return np.array([self._dict[int(c)] for c in codes])

    def scores_at(self, points) -> np.ndarray:
        return self.scores(encode(as_points(points, self.n)))


class BoostedHypothesis(RandomizedHypothesis):
    """sign(sum_s eta * v_s(x)), with sign(0) = +1."""

    deterministic_value = True

    def __init__(self, book: ScoreBook):
        self.book = book
        self.dimension = book.n
        self.budget = 1

    @property
    def components(self) -> list[tuple[RandomizedHypothesis, float]]:
        return self.book.components

    def score(self, points) -> np.ndarray:
        return self.book.scores_at(points)

    def smoothed(self, points, rs=None, budget=None) -> np.ndarray:
        return np.where(self.score(points) >= 0, 1.0, -1.0)

    def sample(self, points, rs=None) -> np.ndarray:
        return self.smoothed(points).astype(np.int8)


def _weights(labels: np.ndarray, scores: np.ndarray) -> np.ndarray:
    return np.minimum(1.0, np.exp(-labels * scores))


class RelabeledSource:
    """Sample access to the round-t relabeled distribution (see module docstring)."""

    def __init__(self, base, book: ScoreBook, mode: str, rs: RandomnessStream):
        if mode not in RELABEL_MODES:
            raise ConfigurationError(f"relabel mode must be one of {RELABEL_MODES}")
        self.base = base
        self.book = book
        self.mode = mode
        self.rs = rs
        self.consumed = 0
        self.offered = 0
        self.weight_sum = 0.0
        self._calls = 0

    @property
    def marginal(self):
        return self.base.marginal

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def acceptance_rate(self) -> float:
        """Mean weight over offered pairs (reject: accepted fraction's expectation)."""
        return self.weight_sum / self.offered if self.offered else 1.0

    def draw(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        count = int(count)
        gen = self.rs.child(self._calls).generator()
        self._calls += 1
        if self.mode == "flip":
            X, y = self.base.draw(count)
            w = _weights(y, self.book.scores(encode(X)))
            self.offered += count
            self.weight_sum += float(w.sum())
            keep = gen.random(count) < (1.0 + w) / 2.0
            self.consumed += count
            return X, np.where(keep, y, -y).astype(np.int8)

        pts, labs = [], []
        got = 0
        while got < count:
            want = max(16, int(1.2 * (count - got) / max(self.acceptance_rate, 1e-3)))
            X, y = self.base.draw(want)
            w = _weights(y, self.book.scores(encode(X)))
            self.offered += want
            self.weight_sum += float(w.sum())
            acc = gen.random(want) < w
            pts.append(X[acc])
            labs.append(y[acc])
            got += int(acc.sum())
        X = np.concatenate(pts)[:count]
        y = np.concatenate(labs)[:count]
        self.consumed += count
        return X, y

    def exact_joint(self) -> JointDistribution:
        """The relabeled distribution itself, when the base exposes an enumerable joint."""
        base = self.base.exact_joint()
        pts, probs, means = base.support_with_means()
        H = self.book.scores(encode(pts))
        q = (1.0 + means) / 2.0
        w_plus = np.minimum(1.0, np.exp(-H))
        w_minus = np.minimum(1.0, np.exp(H))
        if self.mode == "flip":
            new_means = q * w_plus - (1.0 - q) * w_minus
            full_pts, _ = base.marginal.support()
            table = Conditional.from_means(pts, new_means)
            # zero-probability support points still need a table entry
            missing = {int(c) for c in encode(full_pts)} - set(table.table)
            table.table.update({c: 0.5 for c in missing})
            return JointDistribution(base.marginal, table)
        mass = probs * (q * w_plus + (1.0 - q) * w_minus)
        prob_plus = np.where(mass > 0, probs * q * w_plus / np.where(mass > 0, mass, 1.0), 0.5)
        marginal = Explicit(pts, mass / mass.sum())
        return JointDistribution(marginal, Conditional(pts.shape[1], dict(zip(map(int, encode(pts)), prob_plus))))


@dataclass
class BoostResult:
    hypothesis: BoostedHypothesis
    config: BoostConfig
    log: list[dict] = field(default_factory=list)
    skipped: int = 0

    CSV_FIELDS = ("round", "acceptance_rate", "weak_correlation", "error", "skipped")

    @property
    def rounds_run(self) -> int:
        return len(self.log)


def _weak_correlation(out) -> float | None:
    if isinstance(out, tuple) and len(out) >= 3:
        diag = out[2]
        if hasattr(diag, "correlations") and hasattr(diag, "selected_slot"):
            return float(diag.correlations[diag.selected_slot - 1])
        if isinstance(diag, dict) and "correlation" in diag:
            return float(diag["correlation"])
    return None


def boost(
    weak,
    source,
    cfg: BoostConfig,
    rs: RandomnessStream | None = None,
    exact_joint: JointDistribution | None = None,
    on_round=None,
) -> BoostResult:
    """Run ``cfg.T`` rounds of relabel-and-call.

    ``weak(relabeled_source, rs)`` returns a hypothesis or a tuple whose
    first element is one.  A round whose weak learner raises a
    RefuteLabError is skipped and logged; more than ``T/4`` skips raise
    BoostFailure.  When ``exact_joint`` is given, the exact error of the
    running sign(H) is logged after every round.
    """
    rs = rs or RandomnessStream(0)
    book = ScoreBook(source.dimension, rs.child(0))
    result = BoostResult(BoostedHypothesis(book), cfg)
    support = None
    if exact_joint is not None:
        pts, probs, means = exact_joint.support_with_means()
        support = (encode(pts), probs, means)
        book.scores(support[0])
    eta = cfg.step
    T = cfg.T
    for t in range(1, T + 1):
        relabeled = RelabeledSource(source, book, cfg.relabel_mode, rs.child(1, t))
        try:
            out = weak(relabeled, rs.child(2, t))
        except RefuteLabError as err:
            result.skipped += 1
            result.log.append(
                {"round": t, "acceptance_rate": relabeled.acceptance_rate, "weak_correlation": None,
                 "error": None, "skipped": str(err)}
            )
            if result.skipped > cfg.max_skip_fraction * T:
                raise BoostFailure(f"{result.skipped} of {t} rounds skipped") from err
            continue
        h = out[0] if isinstance(out, tuple) else out
        book.add(h, eta)
        row = {
            "round": t,
            "acceptance_rate": relabeled.acceptance_rate,
            "weak_correlation": _weak_correlation(out),
            "error": None,
            "skipped": "",
        }
        if support is not None:
            codes, probs, means = support
            signs = np.where(book.scores(codes) >= 0, 1.0, -1.0)
            row["error"] = float(np.dot(probs, (1.0 - signs * means) / 2.0))
        result.log.append(row)
        if on_round is not None:
            on_round(row)
    return result


def evaluate_error(h: RandomizedHypothesis, j: JointDistribution, mode: str = "exact",
                   count: int = 10_000, rs: RandomnessStream | None = None):
    """Pr[h(x) != y]: exact float over the full support, or a RateReport in monte-carlo mode."""
    rs = rs or RandomnessStream(0)
    if mode == "exact":
        pts, probs, means = j.support_with_means()
        v = h.smoothed(pts, rs)
        return float(np.dot(probs, (1.0 - v * means) / 2.0))
    if mode == "monte-carlo":
        X, y = j.sample(rs.child(0), count)
        pred = h.sample(X, rs.child(1))
        return RateReport(int(np.sum(pred != y)), count)
    raise ArgumentError(f"unknown error mode {mode!r}")


class ScaledConcept(RandomizedHypothesis):
    """Smoothed value scale * c(x), rounded to +-1 on sampling."""

    deterministic_value = True

    def __init__(self, concept, scale: float):
        self.concept = concept
        self.scale = float(np.clip(scale, -1.0, 1.0))
        self.dimension = concept.dimension
        self.budget = 1

    def smoothed(self, points, rs=None, budget=None) -> np.ndarray:
        return self.scale * self.concept.evaluate(points).astype(np.float64)


@dataclass
class AnalyticWeakLearner:
    """Adversarial-but-valid weak learner for analytic contract tests.

    Reads the exact relabeled distribution from the source and returns a
    hypothesis whose correlation is exactly gamma * opt - alpha (clipped
    so the smoothed value stays in [-1, 1]).
    """

    concept_class: ConceptClass
    gamma: float
    alpha: float

    def __call__(self, source, rs=None):
        joint = source.exact_joint()
        opt, best = exact_opt_correlation(joint, self.concept_class)
        if opt <= 0:
            return ScaledConcept(best, 0.0), None, {"correlation": 0.0}
        target = self.gamma * opt - self.alpha
        h = ScaledConcept(best, target / opt)
        return h, None, {"correlation": h.scale * opt}
