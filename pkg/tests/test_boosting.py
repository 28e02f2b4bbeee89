import math

import numpy as np
import pytest

from refutelab.boosting import (
    AnalyticWeakLearner,
    BoostConfig,
    BoostedHypothesis,
    RelabeledSource,
    ScaledConcept,
    ScoreBook,
    boost,
    evaluate_error,
)
from refutelab.core import CoinHypothesis, ConceptHypothesis, ConstantHypothesis, Dictator, all_points, encode, enumerate_class, erm_learner
from refutelab.distributions import (
    ConceptNoisy,
    Conditional,
    Explicit,
    JointDistribution,
    JointSource,
    Uniform,
    exact_opt_error,
    noise_joint,
)
from refutelab.errors import BoostFailure, ConfigurationError, RefuterError
from refutelab.estimators import RateReport
from refutelab.streams import RandomnessStream


def two_point(probs, q_plus):
    pts = np.array([[1], [-1]], dtype=np.int8)
    return JointDistribution(Explicit(pts, np.array(probs)), Conditional(1, {0: q_plus[0], 1: q_plus[1]}))


class RecordingSource(JointSource):
    def __init__(self, joint, rs):
        super().__init__(joint, rs)
        self.emitted = []

    def draw(self, count):
        X, y = super().draw(count)
        self.emitted.append(X.copy())
        return X, y


class TestConfig:
    def test_rounds(self):
        cfg = BoostConfig(0.3, 2 / 48)
        assert cfg.T == math.ceil(2 / ((2 / 48) ** 2 * 0.09) - 1e-9) == 12800
        assert cfg.step == pytest.approx(1 / 48)

    def test_overrides(self):
        cfg = BoostConfig(0.3, 0.1, rounds=7, eta=0.2)
        assert cfg.T == 7 and cfg.step == 0.2
        assert cfg.to_json()["rounds"] == 7

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            BoostConfig(0.0, 0.1)
        with pytest.raises(ConfigurationError):
            BoostConfig(0.1, 0.1, relabel_mode="swap")


class TestEvaluateError:
    def test_planted(self):
        c = Dictator(5, 2, 1)
        j = JointDistribution(Uniform(5), ConceptNoisy(c, 0.1))
        assert evaluate_error(ConceptHypothesis(c), j) == pytest.approx(0.1, abs=1e-12)

    def test_constant_on_coins(self):
        assert evaluate_error(ConstantHypothesis(3, 1.0), noise_joint(Uniform(3))) == 0.5

    def test_negated(self):
        j = JointDistribution(Uniform(3), ConceptNoisy(Dictator(3, 1, 1), 0.0))
        assert evaluate_error(ConceptHypothesis(Dictator(3, 1, -1)), j) == 1.0

    def test_monte_carlo(self):
        c = Dictator(5, 2, 1)
        j = JointDistribution(Uniform(5), ConceptNoisy(c, 0.1))
        rep = evaluate_error(ConceptHypothesis(c), j, "monte-carlo", 20_000, RandomnessStream(0))
        assert isinstance(rep, RateReport)
        lo, hi = rep.interval
        assert lo <= 0.1 <= hi


class TestScoreBook:
    def test_sum_and_ties(self):
        book = ScoreBook(2)
        h = BoostedHypothesis(book)
        pts = all_points(2)
        assert np.all(h.sample(pts) == 1)  # empty score ties to +1
        book.add(ConceptHypothesis(Dictator(2, 1, 1)), 0.5)
        book.add(ScaledConcept(Dictator(2, 2, 1), 0.5), 2.0)
        expected = 0.5 * pts[:, 0] + 1.0 * pts[:, 1]
        assert np.allclose(h.score(pts), expected)
        assert np.array_equal(h.sample(pts), np.where(expected >= 0, 1, -1))

    def test_deterministic_aggregation(self):
        def build():
            book = ScoreBook(3, RandomnessStream(4))
            for k in range(5):
                book.add(CoinHypothesis(3), 0.1)
            return book.scores(np.arange(8))

        assert np.array_equal(build(), build())

    def test_cache_pins_values(self):
        book = ScoreBook(3, RandomnessStream(1))
        book.add(CoinHypothesis(3), 1.0)
        first = book.scores(np.arange(8)).copy()
        assert np.array_equal(first, book.scores(np.arange(8)))


class TestRelabeling:
    def _book(self, weight):
        book = ScoreBook(1)
        book.add(ConceptHypothesis(Dictator(1, 1, 1)), weight)
        return book

    def test_weights_range(self):
        j = two_point((0.5, 0.5), (0.8, 0.3))
        for mode in ("flip", "reject"):
            src = RelabeledSource(JointSource(j, RandomnessStream(0)), self._book(3.0), mode, RandomnessStream(1))
            src.draw(500)
            assert 0 < src.acceptance_rate <= 1

    @pytest.mark.parametrize("mode", ["flip", "reject"])
    def test_exact_joint_matches_draws(self, mode):
        j = two_point((0.6, 0.4), (0.8, 0.3))
        src = RelabeledSource(JointSource(j, RandomnessStream(2)), self._book(0.7), mode, RandomnessStream(3))
        exact = src.exact_joint()
        X, y = src.draw(40_000)
        pts, probs, means = exact.support_with_means()
        codes = encode(X)
        for c, p, mu in zip(encode(pts), probs, means):
            sel = codes == c
            assert abs(sel.mean() - p) < 4 * math.sqrt(p * (1 - p) / 40_000)
            assert abs(y[sel].mean() - mu) < 4 / math.sqrt(sel.sum())

    def test_flip_keeps_points(self):
        j = JointDistribution(Uniform(3), ConceptNoisy(Dictator(3, 1, 1), 0.2))
        base = RecordingSource(j, RandomnessStream(5))
        src = RelabeledSource(base, self._book3(), "flip", RandomnessStream(6))
        X, _ = src.draw(300)
        assert np.array_equal(X, base.emitted[0])

    def test_reject_points_come_from_base(self):
        j = JointDistribution(Uniform(3), ConceptNoisy(Dictator(3, 1, 1), 0.2))
        base = RecordingSource(j, RandomnessStream(7))
        src = RelabeledSource(base, self._book3(), "reject", RandomnessStream(8))
        X, _ = src.draw(300)
        offered = {tuple(r) for block in base.emitted for r in block}
        assert {tuple(r) for r in X} <= offered
        assert src.marginal is j.marginal
        assert not hasattr(src, "sample_points")

    def _book3(self):
        book = ScoreBook(3)
        book.add(ConceptHypothesis(Dictator(3, 2, 1)), 1.5)
        return book


class TestBoost:
    def test_perfect_weak_learner(self):
        c = Dictator(4, 3, -1)
        j = JointDistribution(Uniform(4), ConceptNoisy(c, 0.0))
        cfg = BoostConfig(0.2, 0.5, rounds=3)
        res = boost(lambda src, rs: ConceptHypothesis(c), JointSource(j, RandomnessStream(0)), cfg,
                    RandomnessStream(1), exact_joint=j)
        assert res.log[0]["error"] == 0.0
        assert evaluate_error(res.hypothesis, j) == 0.0

    def test_null_weak_learner(self):
        j = JointDistribution(Uniform(6), ConceptNoisy(Dictator(6, 1, 1), 0.5))
        cfg = BoostConfig(0.2, 0.5, rounds=30)
        res = boost(lambda src, rs: CoinHypothesis(6), JointSource(j, RandomnessStream(0)), cfg, RandomnessStream(1))
        assert res.rounds_run == 30
        assert evaluate_error(res.hypothesis, j) == pytest.approx(0.5)

    def test_erm_monotone_sanity(self):
        c = Dictator(5, 4, 1)
        j = JointDistribution(Uniform(5), ConceptNoisy(c, 0.0))
        learner = erm_learner(enumerate_class("dictators(5)"))

        def weak(src, rs):
            X, y = src.draw(200)
            return learner.train(X, y)

        cfg = BoostConfig(0.2, 1.0, 0.0, rounds=25)
        res = boost(weak, JointSource(j, RandomnessStream(2)), cfg, RandomnessStream(3), exact_joint=j)
        errors = [row["error"] for row in res.log]
        assert errors[-1] <= errors[0] + 0.01

    @pytest.mark.parametrize("mode", ["flip", "reject"])
    def test_acceptance_floor(self, mode):
        j = two_point((0.5, 0.5), (0.6, 0.45))
        cls = enumerate_class("dictators(1)")
        cfg = BoostConfig(0.1, 0.25, 0.05, rounds=400, relabel_mode=mode)
        res = boost(AnalyticWeakLearner(cls, 0.25, 0.05), JointSource(j, RandomnessStream(4)), cfg,
                    RandomnessStream(5), exact_joint=j)
        floor = math.exp(-cfg.T * cfg.step)
        assert all(row["acceptance_rate"] >= floor for row in res.log)

    @pytest.mark.parametrize("mode", ["flip", "reject"])
    def test_contract_strong_signal(self, mode):
        j = two_point((0.5, 0.5), (0.9, 0.2))
        cls = enumerate_class("dictators(1)")
        cfg = BoostConfig(0.1, 0.25, 0.05, relabel_mode=mode)
        res = boost(AnalyticWeakLearner(cls, 0.25, 0.05), JointSource(j, RandomnessStream(6)), cfg,
                    RandomnessStream(7), exact_joint=j)
        assert evaluate_error(res.hypothesis, j) <= exact_opt_error(j, cls) + 0.05 / 0.25 + 0.1

    def test_skips_then_fails(self):
        def broken(src, rs):
            raise RefuterError("refuter down")

        cfg = BoostConfig(0.2, 0.5, rounds=8)
        with pytest.raises(BoostFailure):
            boost(broken, JointSource(noise_joint(Uniform(2)), RandomnessStream(0)), cfg, RandomnessStream(1))

    def test_occasional_skip_logged(self):
        calls = []

        def flaky(src, rs):
            calls.append(1)
            if len(calls) == 2:
                raise RefuterError("once")
            return ConceptHypothesis(Dictator(2, 1, 1))

        cfg = BoostConfig(0.2, 0.5, rounds=8)
        res = boost(flaky, JointSource(noise_joint(Uniform(2)), RandomnessStream(0)), cfg, RandomnessStream(1))
        assert res.skipped == 1
        assert res.rounds_run == 8
        assert len(res.hypothesis.components) == 7
        assert res.log[1]["skipped"] == "once"

    def test_replay(self):
        j = JointDistribution(Uniform(3), ConceptNoisy(Dictator(3, 1, 1), 0.2))
        cfg = BoostConfig(0.3, 0.5, rounds=10)

        def run():
            res = boost(lambda s, rs: CoinHypothesis(3), JointSource(j, RandomnessStream(0)), cfg,
                        RandomnessStream(1), exact_joint=j)
            return res.log, res.hypothesis.score(all_points(3))

        (la, sa), (lb, sb) = run(), run()
        assert la == lb and np.array_equal(sa, sb)
