"""Refutation-based agnostic learning at desk scale."""

from .core import ConceptClass, enumerate_class, erm_learner, parse_class_spec, parse_concept
from .distributions import JointDistribution, JointSource, noise_joint, parse_joint, parse_marginal
from .estimators import Estimate, RateReport, compare_rates, rademacher_complexity
from .refuters import Verdict, correlation_refuter, learner_to_refuter, run_refuter_trials
from .hybrid import HybridWeakLearner, extract_weak_learner
from .boosting import BoostConfig, boost, evaluate_error
from .harness import ExperimentConfig, ExperimentReport, run_experiment
from .streams import RandomnessStream

__version__ = "0.1.0"

__all__ = [
    "BoostConfig",
    "ConceptClass",
    "Estimate",
    "ExperimentConfig",
    "ExperimentReport",
    "HybridWeakLearner",
    "JointDistribution",
    "JointSource",
    "RandomnessStream",
    "RateReport",
    "Verdict",
    "boost",
    "compare_rates",
    "correlation_refuter",
    "enumerate_class",
    "erm_learner",
    "evaluate_error",
    "extract_weak_learner",
    "learner_to_refuter",
    "noise_joint",
    "parse_class_spec",
    "parse_concept",
    "parse_joint",
    "parse_marginal",
    "rademacher_complexity",
    "run_experiment",
    "run_refuter_trials",
]
