import math

import numpy as np
import pytest

from refutelab.core import Dictator, Parity, all_points, enumerate_class
from refutelab.distributions import (
    ConceptNoisy,
    Conditional,
    Explicit,
    JointDistribution,
    JointSource,
    Product,
    Rademacher,
    Uniform,
    class_correlations,
    exact_correlation,
    exact_opt_correlation,
    exact_opt_error,
    noise_joint,
    parse_joint,
    parse_labels,
    parse_marginal,
    sample_joint,
    sample_marginal,
)
from refutelab.errors import ArgumentError, ConfigurationError, SampleBudgetError, SizeCapError
from refutelab.streams import RandomnessStream


class TestMarginals:
    def test_replayable(self):
        rs = RandomnessStream(3, (1,))
        a = sample_marginal(Uniform(1), rs, 4)
        assert a.shape == (4, 1)
        assert np.array_equal(a, sample_marginal(Uniform(1), rs, 4))

    def test_degenerate_product(self):
        pts = Product((1.0, 1.0, 1.0)).sample(RandomnessStream(0), 50)
        assert np.all(pts == 1)

    def test_uniform_means(self):
        pts = Uniform(8).sample(RandomnessStream(1), 100_000)
        assert np.all(np.abs(pts.mean(axis=0)) < 0.02)

    def test_product_support_sums_to_one(self):
        pts, probs = Product((0.2, 0.7, 0.5)).support()
        assert abs(probs.sum() - 1) < 1e-12
        assert probs[0] == pytest.approx(0.2 * 0.7 * 0.5)  # the all-plus point has code 0

    def test_explicit_validation(self):
        with pytest.raises(ConfigurationError):
            Explicit(np.array([[1, 1], [1, 1]]), np.array([0.5, 0.5]))
        with pytest.raises(ConfigurationError):
            Explicit(np.array([[1, 1]]), np.array([0.9]))

    def test_support_cap(self):
        with pytest.raises(SizeCapError):
            Uniform(22).support()

    def test_count_validation(self):
        with pytest.raises(ArgumentError):
            Uniform(2).sample(RandomnessStream(0), 0)


class TestLabelLaws:
    def test_realizable(self):
        c = Dictator(4, 2, -1)
        pts, y = JointDistribution(Uniform(4), ConceptNoisy(c, 0.0)).sample(RandomnessStream(2), 500)
        assert np.array_equal(y, c.evaluate(pts))

    def test_rademacher_uncorrelated(self):
        c = Dictator(6, 1, 1)
        pts, y = noise_joint(Uniform(6)).sample(RandomnessStream(4), 100_000)
        assert abs(np.mean(y * c.evaluate(pts))) < 0.02

    def test_flip_rate_correlation(self):
        c = Dictator(5, 4, 1)
        j = JointDistribution(Uniform(5), ConceptNoisy(c, 0.1))
        assert exact_correlation(j, c) == pytest.approx(0.8, abs=1e-12)
        # brute force: each point contributes (0.9 - 0.1) * c(x)^2 / 32
        pts = all_points(5)
        assert sum(0.8 * c.evaluate(pts) ** 2) / 32 == pytest.approx(0.8)

    def test_conditional_missing_entry(self):
        law = Conditional(2, {0: 0.7})
        with pytest.raises(ConfigurationError):
            law.mean(all_points(2))

    def test_conditional_from_means(self):
        pts = all_points(2)
        law = Conditional.from_means(pts, np.array([0.5, -0.5, 0.0, 1.0]))
        assert np.allclose(law.mean(pts), [0.5, -0.5, 0.0, 1.0])

    def test_flip_bounds(self):
        with pytest.raises(ConfigurationError):
            ConceptNoisy(Dictator(2, 1, 1), 0.6)


class TestJoint:
    def test_marginal_preservation(self):
        j = JointDistribution(Product((0.3, 0.8)), ConceptNoisy(Dictator(2, 1, 1), 0.2))
        rs = RandomnessStream(7, (2,))
        pts, _ = sample_joint(j, rs, 300)
        assert np.array_equal(pts, sample_marginal(j.marginal, rs, 300))

    def test_self_correlation(self):
        c = Parity(3, (1, 3))
        assert exact_correlation(JointDistribution(Uniform(3), ConceptNoisy(c, 0.0)), c) == 1.0

    def test_noise_correlation(self):
        assert exact_correlation(noise_joint(Uniform(3)), Dictator(3, 2, 1)) == 0.0

    def test_parity_vs_dictator(self):
        j = JointDistribution(Uniform(2), ConceptNoisy(Parity(2, (1, 2)), 0.25))
        assert exact_correlation(j, Dictator(2, 1, 1)) == pytest.approx(0.0, abs=1e-15)

    def test_opt_planted(self):
        cls = enumerate_class("dictators(5)")
        c = Dictator(5, 3, -1)
        cor, best = exact_opt_correlation(JointDistribution(Uniform(5), ConceptNoisy(c, 0.1)), cls)
        assert cor == pytest.approx(0.8)
        assert best == c

    def test_opt_noise_first_concept(self):
        cls = enumerate_class("dictators(3)")
        cor, best = exact_opt_correlation(noise_joint(Uniform(3)), cls)
        assert cor == 0.0
        assert best.descriptor == "dict:+1"

    def test_opt_tie_lower_index(self):
        cls = enumerate_class("dictators(2)")
        # E[y|x] = 0.4 * x2: +x2 wins, so the tie case uses equal table entries instead
        j = JointDistribution(Uniform(2), Conditional(2, {0: 0.5, 1: 0.5, 2: 0.5, 3: 0.5}))
        assert exact_opt_correlation(j, cls)[1].descriptor == "dict:+1"

    def test_opt_is_max_of_scan(self):
        rng = np.random.default_rng(9)
        pts = all_points(4)
        j = JointDistribution(Uniform(4), Conditional.from_means(pts, rng.uniform(-1, 1, 16)))
        cls = enumerate_class("conjunctions(4,2)")
        scan = [exact_correlation(j, c) for c in cls]
        cor, best = exact_opt_correlation(j, cls)
        assert cor == max(scan)
        assert cls.index_of(best) == int(np.argmax(scan))
        assert np.allclose(class_correlations(j, cls), scan)

    def test_opt_error_identity(self):
        rng = np.random.default_rng(10)
        pts = all_points(3)
        j = JointDistribution(Product((0.3, 0.6, 0.5)), Conditional.from_means(pts, rng.uniform(-1, 1, 8)))
        cls = enumerate_class("halfspaces(3,1)")
        probs = j.marginal.support()[1]
        q = (1 + j.labels.mean(pts)) / 2
        errors = [float(np.dot(probs, np.where(c.evaluate(pts) > 0, 1 - q, q))) for c in cls]
        assert exact_opt_error(j, cls) == pytest.approx(min(errors), abs=1e-12)
        assert exact_opt_error(j, cls) == pytest.approx((1 - exact_opt_correlation(j, cls)[0]) / 2, abs=1e-15)


class TestSource:
    def test_counts_and_replay(self):
        j = JointDistribution(Uniform(3), Rademacher())
        a, b = JointSource(j, RandomnessStream(1)), JointSource(j, RandomnessStream(1))
        for k in (5, 1, 9):
            xa, ya = a.draw(k)
            xb, yb = b.draw(k)
            assert np.array_equal(xa, xb) and np.array_equal(ya, yb)
        assert a.consumed == 15

    def test_budget(self):
        src = JointSource(noise_joint(Uniform(2)), RandomnessStream(0), budget=10)
        src.draw(8)
        with pytest.raises(SampleBudgetError):
            src.draw(3)


class TestSerialization:
    @pytest.mark.parametrize(
        "text",
        [
            'joint{marginal=uniform(8), labels=concept_noisy("dict:+3", 0.2)}',
            "joint{marginal=product([0.25,0.5]), labels=rademacher}",
            "joint{marginal=explicit([++:0.5, -+:0.5]), labels=conditional([++:0.9, -+:0.1])}",
        ],
    )
    def test_roundtrip(self, text):
        j = parse_joint(text)
        again = parse_joint(str(j))
        assert str(again) == str(j)
        pts, probs, means = j.support_with_means()
        pts2, probs2, means2 = again.support_with_means()
        assert np.array_equal(pts, pts2) and np.allclose(probs, probs2) and np.allclose(means, means2)

    def test_bad_text(self):
        with pytest.raises(ConfigurationError):
            parse_marginal("gaussian(3)")
        with pytest.raises(ConfigurationError):
            parse_labels("concept_noisy(dict:+1)", 3)
        with pytest.raises(ConfigurationError):
            parse_joint("uniform(3)")
