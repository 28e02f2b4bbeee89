"""Turning a refuter into a weak agnostic learner with hybrid samples.

For a refuter with sample size m and a slot 1 <= i <= m, the hybrid bit
W_{i,b}(x) runs the refuter on a sample whose slots 1..i-1 hold noise
pairs (x ~ D, fair-coin label), slot i holds the planted pair (x, b) and
slots i+1..m hold pairs from the structured source D'.  The candidate
h_i(x) = W_{i,+1}(x) - W_{i,-1}(x) is smoothed over K contexts.

Both signs of one evaluation share the same context (and the same refuter
coins), so a refuter that ignores labels gives h_i = 0 exactly.

Context modes:
  frozen  K contexts per slot are drawn once and reused; the resulting
          hypothesis is a deterministic function of x.
  fresh   every evaluation draws K new contexts (consuming m - i
          structured draws each).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RandomizedHypothesis, as_points, encode, round_values
from .distributions import JointDistribution, JointSource, noise_joint
from .errors import ArgumentError, ConfigurationError
from .estimators import Estimate, RateReport, hoeffding_radius
from .refuters import Refuter, TrialReport, run_refuter_trials
from .streams import RandomnessStream

DEFAULT_K = 8
DEFAULT_C_SEL = 48
CONTEXT_MODES = ("frozen", "fresh")

# stream labels under a family's root stream
_NOISE, _COINS, _FRESH, _SLOT, _FROZEN_NOISE = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class WeakLearnerSpec:
    gamma: float
    alpha: float
    delta: float

    @classmethod
    def for_refuter(cls, m: int, delta: float) -> "WeakLearnerSpec":
        gamma = 2.0 / (3.0 * m)
        return cls(gamma, delta * gamma, delta)


def selection_size(m: int, c_sel: float = DEFAULT_C_SEL) -> int:
    return math.ceil(c_sel * math.log(m + 1))


def _as_source(joint_or_source, rs: RandomnessStream):
    if hasattr(joint_or_source, "draw"):
        return joint_or_source
    return JointSource(joint_or_source, rs)


class HybridFamily:
    """All hybrid functions W_{i,b} (1 <= i <= m) for one refuter and one source."""

    def __init__(
        self,
        refuter: Refuter,
        source,
        mode: str = "frozen",
        K: int = DEFAULT_K,
        rs: RandomnessStream | None = None,
    ):
        if mode not in CONTEXT_MODES:
            raise ConfigurationError(f"context mode must be one of {CONTEXT_MODES}, got {mode!r}")
        if K < 1:
            raise ConfigurationError("smoothing budget K must be >= 1")
        self.refuter = refuter
        self.m = refuter.m
        self.rs = rs or RandomnessStream(0)
        self.source = _as_source(source, self.rs.child(99))
        self.marginal = self.source.marginal
        self.n = self.marginal.dimension
        self.mode = mode
        self.K = K
        self.refuter_calls = 0
        self._frozen: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._fresh_calls = 0

    # -- contexts ---------------------------------------------------------

    def _check_slot(self, slot: int) -> None:
        if not 1 <= slot <= self.m:
            raise ArgumentError(f"slot must be in [1, {self.m}], got {slot}")

    def draw_contexts(self, slot: int, count: int, rs: RandomnessStream) -> tuple[np.ndarray, np.ndarray]:
        """``count`` contexts for ``slot`` as (count, m, n) points and (count, m) labels.

        The planted position (index slot-1) is left as a placeholder.
        """
        self._check_slot(slot)
        pts = np.ones((count, self.m, self.n), dtype=np.int8)
        lab = np.ones((count, self.m), dtype=np.int8)
        if slot > 1:
            npts, nlab = noise_joint(self.marginal).sample(rs.child(_NOISE), count * (slot - 1))
            pts[:, : slot - 1] = npts.reshape(count, slot - 1, self.n)
            lab[:, : slot - 1] = nlab.reshape(count, slot - 1)
        if slot < self.m:
            spts, slab = self.source.draw(count * (self.m - slot))
            pts[:, slot:] = spts.reshape(count, self.m - slot, self.n)
            lab[:, slot:] = slab.reshape(count, self.m - slot)
        return pts, lab

    def frozen_contexts(self, slot: int) -> tuple[np.ndarray, np.ndarray]:
        if slot not in self._frozen:
            pts, lab = self.draw_contexts(slot, self.K, self.rs.child(_SLOT, slot))
            pts.setflags(write=False)
            lab.setflags(write=False)
            self._frozen[slot] = (pts, lab)
        return self._frozen[slot]

    def freeze_all(self) -> None:
        """Draw the frozen contexts of every slot with one noise draw and one source draw."""
        todo = [s for s in range(1, self.m + 1) if s not in self._frozen]
        if not todo:
            return
        K, m, n = self.K, self.m, self.n
        n_noise = K * sum(s - 1 for s in todo)
        n_struct = K * sum(m - s for s in todo)
        if n_noise:
            npts, nlab = noise_joint(self.marginal).sample(self.rs.child(_FROZEN_NOISE), n_noise)
        if n_struct:
            spts, slab = self.source.draw(n_struct)
        a = b = 0
        for slot in todo:
            pts = np.ones((K, m, n), dtype=np.int8)
            lab = np.ones((K, m), dtype=np.int8)
            k_noise, k_struct = K * (slot - 1), K * (m - slot)
            if k_noise:
                pts[:, : slot - 1] = npts[a : a + k_noise].reshape(K, slot - 1, n)
                lab[:, : slot - 1] = nlab[a : a + k_noise].reshape(K, slot - 1)
            if k_struct:
                pts[:, slot:] = spts[b : b + k_struct].reshape(K, m - slot, n)
                lab[:, slot:] = slab[b : b + k_struct].reshape(K, m - slot)
            a += k_noise
            b += k_struct
            pts.setflags(write=False)
            lab.setflags(write=False)
            self._frozen[slot] = (pts, lab)

    def frozen_w_all(self, points, max_elements: int = 2**25):
        """W_{i,+1} and W_{i,-1} for every slot at once, each shaped (m, P, K).

        Frozen mode with a deterministic refuter runs several slots per
        refuter batch; otherwise it falls back to per-slot evaluation.
        """
        pts = as_points(points, self.n)
        P, K, m = pts.shape[0], self.K, self.m
        self.freeze_all()
        plus = np.empty((m, P, K), dtype=np.int8)
        minus = np.empty((m, P, K), dtype=np.int8)
        if self.mode != "frozen" or self.refuter.randomized:
            for slot in range(1, m + 1):
                plus[slot - 1], minus[slot - 1] = self.w_pair(slot, pts)
            return plus, minus
        per_slot = P * K * m * self.n
        group = max(1, max_elements // max(1, per_slot))
        for start in range(1, m + 1, group):
            slots = range(start, min(m, start + group - 1) + 1)
            X = np.empty((len(slots), P, K, m, self.n), dtype=np.int8)
            y = np.empty((len(slots), P, K, m), dtype=np.int8)
            for g, slot in enumerate(slots):
                cpts, clab = self._frozen[slot]
                X[g] = cpts[None]
                y[g] = clab[None]
                X[g, :, :, slot - 1] = pts[:, None, :]
            X = X.reshape(-1, m, self.n)
            y = y.reshape(len(slots), P, K, m)
            for sign, out in ((1, plus), (-1, minus)):
                for g, slot in enumerate(slots):
                    y[g, :, :, slot - 1] = sign
                self.refuter_calls += X.shape[0]
                flags = self.refuter.decide_batch(X, y.reshape(-1, m))
                out[start - 1 : start - 1 + len(slots)] = flags.reshape(len(slots), P, K)
        return plus, minus

    # -- W evaluation -----------------------------------------------------

    def _run(self, ctx_pts, ctx_lab, slot, points, signs, coin_streams) -> np.ndarray:
        """Run the refuter with (points[r], signs[r]) planted into context r."""
        X = np.array(ctx_pts, dtype=np.int8, copy=True)
        y = np.array(ctx_lab, dtype=np.int8, copy=True)
        X[:, slot - 1] = points
        y[:, slot - 1] = signs
        self.refuter_calls += X.shape[0]
        if not self.refuter.randomized:
            return self.refuter.decide_batch(X, y).astype(np.int8)
        return np.array(
            [self.refuter.run(X[r], y[r], coin_streams[r])[0].value == "structure" for r in range(X.shape[0])],
            dtype=np.int8,
        )

    def _coin_streams(self, root: RandomnessStream, ctx_ids, codes):
        if not self.refuter.randomized:
            return None
        return [root.child(int(k), int(c)) for k, c in zip(ctx_ids, codes)]

    def w_pair(self, slot: int, points, rs: RandomnessStream | None = None, K: int | None = None):
        """W_{slot,+1} and W_{slot,-1} bits at each point, shape (P, K) each.

        Both signs of a (point, context) pair share the context and coins.
        """
        self._check_slot(slot)
        pts = as_points(points, self.n)
        P = pts.shape[0]
        codes = encode(pts)
        if self.mode == "frozen":
            K = self.K
            cpts, clab = self.frozen_contexts(slot)
            ctx_pts = np.broadcast_to(cpts[None], (P, K, self.m, self.n)).reshape(P * K, self.m, self.n)
            ctx_lab = np.broadcast_to(clab[None], (P, K, self.m)).reshape(P * K, self.m)
            coin_root = self.rs.child(_COINS, slot)
        else:
            K = K or self.K
            if rs is None:
                rs = self.rs.child(_FRESH, self._fresh_calls)
                self._fresh_calls += 1
            ctx_pts, ctx_lab = self.draw_contexts(slot, P * K, rs)
            coin_root = rs.child(_COINS)
        planted = np.repeat(pts, K, axis=0)
        ctx_ids = np.tile(np.arange(K), P) if self.mode == "frozen" else np.arange(P * K)
        coins = self._coin_streams(coin_root, ctx_ids, np.repeat(codes, K))
        plus = self._run(ctx_pts, ctx_lab, slot, planted, np.ones(P * K, np.int8), coins)
        minus = self._run(ctx_pts, ctx_lab, slot, planted, -np.ones(P * K, np.int8), coins)
        return plus.reshape(P, K), minus.reshape(P, K)

    def h_values(self, slot: int, points, rs: RandomnessStream | None = None, K: int | None = None) -> np.ndarray:
        """Smoothed candidate value (1/K) sum_k [W_{i,+1} - W_{i,-1}], in [-1, 1]."""
        plus, minus = self.w_pair(slot, points, rs, K)
        return (plus.astype(np.float64) - minus).mean(axis=1)

    @property
    def samples_consumed(self) -> int:
        return self.source.consumed


@dataclass(frozen=True)
class HybridEvaluator:
    """One slot of a :class:`HybridFamily`."""

    family: HybridFamily
    slot: int

    def __post_init__(self):
        self.family._check_slot(self.slot)


def eval_W(h: HybridEvaluator, x, b: int, rs: RandomnessStream | None = None, context: int | None = None) -> int:
    """A single hybrid bit W_{i,b}(x).

    Fresh mode draws the context from ``rs``; frozen mode uses frozen context
    ``context`` (or one picked with ``rs`` when not given).
    """
    fam = h.family
    pts = as_points(x, fam.n)
    if b not in (1, -1):
        raise ArgumentError("planted label must be +1 or -1")
    if fam.mode == "frozen":
        cpts, clab = fam.frozen_contexts(h.slot)
        if context is None:
            context = int((rs or RandomnessStream(0)).generator().integers(fam.K))
        coins = fam._coin_streams(fam.rs.child(_COINS, h.slot), [context], encode(pts))
        return int(fam._run(cpts[context : context + 1], clab[context : context + 1], h.slot, pts, [b], coins)[0])
    rs = rs or RandomnessStream(0)
    cpts, clab = fam.draw_contexts(h.slot, 1, rs)
    coins = fam._coin_streams(rs.child(_COINS), [0], encode(pts))
    return int(fam._run(cpts, clab, h.slot, pts, [b], coins)[0])


def eval_h(slot: int, x, family: HybridFamily, K: int | None = None, rs: RandomnessStream | None = None) -> np.ndarray:
    return family.h_values(slot, x, rs, K)


class HybridHypothesis(RandomizedHypothesis):
    """Randomized rounding of the smoothed candidate at a fixed slot."""

    def __init__(self, family: HybridFamily, slot: int):
        family._check_slot(slot)
        self.family = family
        self.slot = slot
        self.dimension = family.n
        self.budget = family.K
        self.deterministic_value = family.mode == "frozen"

    def smoothed(self, points, rs=None, budget=None) -> np.ndarray:
        return self.family.h_values(self.slot, points, rs, budget)

    def sample(self, points, rs: RandomnessStream) -> np.ndarray:
        v = self.smoothed(points, rs.child(0))
        return round_values(v, rs.child(1).generator())

    def __repr__(self):
        return f"HybridHypothesis(slot={self.slot}, K={self.budget}, mode={self.family.mode})"


# ---------------------------------------------------------------------------
# rates over configurations
# ---------------------------------------------------------------------------


def endpoint_rates(
    refuter: Refuter,
    joint: JointDistribution,
    trials: int,
    rs: RandomnessStream,
    noise: JointDistribution | None = None,
) -> tuple[TrialReport, TrialReport]:
    """STRUCTURE rates on m structured pairs (w0) and on m noise pairs (wend)."""
    if trials < 100:
        raise ArgumentError("endpoint_rates needs at least 100 trials")
    noise = noise or noise_joint(joint.marginal)
    w0 = run_refuter_trials(refuter, joint, trials, rs.child(0), regime="structure")
    wend = run_refuter_trials(refuter, noise, trials, rs.child(1), regime="noise")
    return w0, wend


def configuration_rate(
    refuter: Refuter,
    joint: JointDistribution,
    noise_slots: int,
    trials: int,
    rs: RandomnessStream,
) -> RateReport:
    """STRUCTURE rate with ``noise_slots`` noise pairs followed by m - noise_slots structured pairs."""
    m = refuter.m
    if not 0 <= noise_slots <= m:
        raise ArgumentError(f"noise_slots must be in [0, {m}]")
    X = np.empty((trials, m, joint.dimension), dtype=np.int8)
    y = np.empty((trials, m), dtype=np.int8)
    if noise_slots:
        npts, nlab = noise_joint(joint.marginal).sample(rs.child(0), trials * noise_slots)
        X[:, :noise_slots] = npts.reshape(trials, noise_slots, -1)
        y[:, :noise_slots] = nlab.reshape(trials, noise_slots)
    if noise_slots < m:
        spts, slab = joint.sample(rs.child(1), trials * (m - noise_slots))
        X[:, noise_slots:] = spts.reshape(trials, m - noise_slots, -1)
        y[:, noise_slots:] = slab.reshape(trials, m - noise_slots)
    flags = refuter.decide_batch(X, y, rs.child(2))
    return RateReport(int(flags.sum()), trials)


@dataclass(frozen=True)
class SlotRates:
    """Fresh-context Monte Carlo estimates at one slot.

    planted_structured: E over (x, y) ~ D' of W_{i,y}(x)      (A_i)
    planted_noise:      E over x ~ D, b fair coin of W_{i,b}(x)  (B_i)
    correlation:        E over (x, y) ~ D' of y * h_i(x)
    """

    slot: int
    planted_structured: RateReport
    planted_noise: RateReport
    correlation: Estimate


def slot_rates(
    refuter: Refuter,
    joint: JointDistribution,
    slot: int,
    evaluations: int,
    rs: RandomnessStream,
) -> SlotRates:
    """Independent estimates of A_i, B_i and E[y h_i], each from ``evaluations`` fresh draws."""
    fam_a = HybridFamily(refuter, JointSource(joint, rs.child(0, 0)), "fresh", 1, rs.child(0, 1))
    xa, ya = joint.sample(rs.child(0, 2), evaluations)
    plus, minus = fam_a.w_pair(slot, xa, rs.child(0, 3), K=1)
    a_bits = np.where(ya > 0, plus[:, 0], minus[:, 0])

    fam_b = HybridFamily(refuter, JointSource(joint, rs.child(1, 0)), "fresh", 1, rs.child(1, 1))
    xb = joint.marginal.sample(rs.child(1, 2), evaluations)
    coins = noise_joint(joint.marginal).labels.sample(xb, rs.child(1, 4))
    plus_b, minus_b = fam_b.w_pair(slot, xb, rs.child(1, 3), K=1)
    b_bits = np.where(coins > 0, plus_b[:, 0], minus_b[:, 0])

    fam_c = HybridFamily(refuter, JointSource(joint, rs.child(2, 0)), "fresh", 1, rs.child(2, 1))
    xc, yc = joint.sample(rs.child(2, 2), evaluations)
    plus_c, minus_c = fam_c.w_pair(slot, xc, rs.child(2, 3), K=1)
    prods = yc * (plus_c[:, 0].astype(np.float64) - minus_c[:, 0])
    sd = float(prods.std(ddof=1)) if evaluations > 1 else 0.0
    corr = Estimate(float(prods.mean()), 3 * sd / math.sqrt(evaluations), 0.997, evaluations, "3-sigma")

    return SlotRates(
        slot,
        RateReport(int(a_bits.sum()), evaluations),
        RateReport(int(b_bits.sum()), evaluations),
        corr,
    )


def planted_noise_rate(
    refuter: Refuter, joint: JointDistribution, slot: int, evaluations: int, rs: RandomnessStream
) -> RateReport:
    """E over x ~ D and b fair coin of W_{slot,b}(x), fresh contexts."""
    fam = HybridFamily(refuter, JointSource(joint, rs.child(0)), "fresh", 1, rs.child(1))
    x = joint.marginal.sample(rs.child(2), evaluations)
    coins = noise_joint(joint.marginal).labels.sample(x, rs.child(4))
    plus, minus = fam.w_pair(slot, x, rs.child(3), K=1)
    return RateReport(int(np.where(coins > 0, plus[:, 0], minus[:, 0]).sum()), evaluations)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


@dataclass
class ExtractionDiagnostics:
    selected_slot: int
    selection_size: int
    planted_structured: np.ndarray  # A-hat per slot
    planted_noise: np.ndarray  # B-hat per slot
    correlations: np.ndarray  # candidate correlation estimates per slot
    radius: float
    samples_consumed: int
    refuter_calls: int
    consumed_by_slot: list[int] = field(default_factory=list)

    CSV_FIELDS = ("slot", "A_hat", "B_hat", "correlation", "radius", "samples_consumed")

    def rows(self) -> list[dict]:
        return [
            {
                "slot": i + 1,
                "A_hat": float(self.planted_structured[i]),
                "B_hat": float(self.planted_noise[i]),
                "correlation": float(self.correlations[i]),
                "radius": self.radius,
                "samples_consumed": self.consumed_by_slot[i] if self.consumed_by_slot else 0,
            }
            for i in range(len(self.correlations))
        ]

    def to_json(self) -> dict:
        return {
            "selected_slot": self.selected_slot,
            "selection_size": self.selection_size,
            "selected_correlation": float(self.correlations[self.selected_slot - 1]),
            "radius": self.radius,
            "samples_consumed": self.samples_consumed,
            "refuter_calls": self.refuter_calls,
        }


def extract_weak_learner(
    refuter: Refuter,
    source,
    selection: int | None = None,
    K: int = DEFAULT_K,
    rs: RandomnessStream | None = None,
    mode: str = "frozen",
    c_sel: float = DEFAULT_C_SEL,
) -> tuple[HybridHypothesis, WeakLearnerSpec, ExtractionDiagnostics]:
    """Pick the candidate h_i with the largest empirical label correlation.

    ``source`` is a counted sample source for D' (or a JointDistribution,
    which is wrapped in one).  Candidates are scored with their smoothed
    values on a fresh selection sample; ties go to the smallest slot.
    """
    rs = rs or RandomnessStream(0)
    m = refuter.m
    need = selection_size(m, c_sel)
    selection = need if selection is None else int(selection)
    if selection < need:
        raise ConfigurationError(f"selection sample must be >= {need} for m={m}; got {selection}")
    source = _as_source(source, rs.child(3))
    family = HybridFamily(refuter, source, mode, K, rs.child(0))

    consumed_by_slot = []
    if mode == "frozen":
        family.freeze_all()
        consumed_by_slot = [K * (m - slot) for slot in range(1, m + 1)]

    X, y = source.draw(selection)
    if mode == "frozen":
        all_plus, all_minus = family.frozen_w_all(X)
    a_hat = np.empty(m)
    b_hat = np.empty(m)
    cors = np.empty(m)
    for slot in range(1, m + 1):
        if mode == "frozen":
            plus, minus = all_plus[slot - 1], all_minus[slot - 1]
        else:
            before = source.consumed
            plus, minus = family.w_pair(slot, X, rs.child(1, slot))
            consumed_by_slot.append(source.consumed - before)
        planted = np.where(y[:, None] > 0, plus, minus)
        a_hat[slot - 1] = planted.mean()
        b_hat[slot - 1] = (plus.mean() + minus.mean()) / 2.0
        cors[slot - 1] = float(np.mean(y * (plus.astype(np.float64) - minus).mean(axis=1)))
    best = int(np.argmax(cors)) + 1

    diag = ExtractionDiagnostics(
        selected_slot=best,
        selection_size=selection,
        planted_structured=a_hat,
        planted_noise=b_hat,
        correlations=cors,
        radius=hoeffding_radius(selection),
        samples_consumed=source.consumed,
        refuter_calls=family.refuter_calls,
        consumed_by_slot=consumed_by_slot,
    )
    return HybridHypothesis(family, best), WeakLearnerSpec.for_refuter(m, refuter.delta), diag


@dataclass
class HybridWeakLearner:
    """Weak-learner factory for the booster: source -> (hypothesis, spec, diagnostics)."""

    refuter: Refuter
    K: int = DEFAULT_K
    mode: str = "frozen"
    c_sel: float = DEFAULT_C_SEL
    selection: int | None = None

    @property
    def spec(self) -> WeakLearnerSpec:
        return WeakLearnerSpec.for_refuter(self.refuter.m, self.refuter.delta)

    def __call__(self, source, rs: RandomnessStream):
        return extract_weak_learner(self.refuter, source, self.selection, self.K, rs, self.mode, self.c_sel)
