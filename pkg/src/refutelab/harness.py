"""Named experiment pipelines with seeded, replayable reports."""

from __future__ import annotations

import copy
import csv
import json
import math
import time
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import _kernels
from .boosting import BoostConfig, BoostResult, boost, evaluate_error
from .core import ConceptClass, enumerate_class, erm_learner
from .distributions import (
    JointDistribution,
    JointSource,
    exact_opt_correlation,
    noise_joint,
    parse_joint,
    parse_marginal,
)
from .errors import ConfigurationError, RefuteLabError
from .estimators import rademacher_complexity
from .hybrid import (
    DEFAULT_C_SEL,
    ExtractionDiagnostics,
    HybridWeakLearner,
    endpoint_rates,
    extract_weak_learner,
)
from .refuters import (
    TrialReport,
    correlation_refuter,
    correlation_sample_bound,
    learner_to_refuter,
    run_refuter_trials,
)
from .streams import RandomnessStream

EXPERIMENTS = ("refute-test", "learner-as-refuter", "weak-extract", "rademacher", "end2end")
THRESHOLD = 2.0 / 3.0

# per-experiment defaults; each mirrors the reference configuration for that pipeline
DEFAULTS: dict[str, dict[str, Any]] = {
    "refute-test": {
        "class_spec": "dictators(8)",
        "joint": 'joint{marginal=uniform(8), labels=concept_noisy("dict:+1", 0.2)}',
        "delta": 0.5,
        "m": 256,
        "trials": 300,
    },
    "learner-as-refuter": {
        "class_spec": "dictators(8)",
        "joint": 'joint{marginal=uniform(8), labels=concept_noisy("dict:+1", 0.2)}',
        "delta": 0.5,
        "trials": 300,
    },
    "weak-extract": {
        "class_spec": "dictators(6)",
        "joint": 'joint{marginal=uniform(6), labels=concept_noisy("dict:+1", 0.05)}',
        "delta": 0.5,
        "m": 64,
        "trials": 10,
    },
    "rademacher": {
        "class_spec": "dictators(1)",
        "joint": "joint{marginal=uniform(1), labels=rademacher}",
        "m": 4,
        "trials": 10_000,
        "expected": 0.375,
    },
    "end2end": {
        "class_spec": "dictators(6)",
        "joint": 'joint{marginal=uniform(6), labels=concept_noisy("dict:+1", 0.1)}',
        "delta": 0.6,
        "epsilon": 0.3,
        "m": 16,
        "trials": 1000,
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    class_spec: Any = "dictators(8)"
    joint: str = 'joint{marginal=uniform(8), labels=concept_noisy("dict:+1", 0.2)}'
    delta: float = 0.5
    epsilon: float = 0.3
    m: int | None = None
    trials: int = 300
    K: int = 8
    context_mode: str = "frozen"
    c_sel: float = DEFAULT_C_SEL
    amplification: int = 1
    enforce_sample_bound: bool = False
    boost: dict = field(default_factory=dict)
    seed: int = 0
    # rademacher
    rademacher_mode: str = "exact"
    expected: float | None = None
    tolerance: float = 1e-12
    # weak-extract / end2end predicates
    pass_fraction: float = 0.8
    slack: float = 0.02
    baseline_margin: float = 0.05

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        unknown = set(self.boost) - {"c_T", "rounds", "eta", "relabel_mode", "round_sample"}
        if unknown:
            raise ConfigurationError(f"unknown boost overrides: {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, data: dict, experiment: str | None = None) -> "ExperimentConfig":
        data = dict(data)
        if "class" in data:
            data["class_spec"] = data.pop("class")
        exp = experiment or data.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
        merged = {**DEFAULTS[exp], **data, "experiment": exp}
        names = {f.name for f in fields(cls)}
        unknown = set(merged) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**merged)

    @classmethod
    def load(cls, path, experiment: str | None = None, **overrides) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a key-value mapping")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(data, experiment)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    config: dict
    metrics: dict = field(default_factory=dict)
    ledger: dict = field(default_factory=dict)
    verdict: str = "fail"
    error: str | None = None
    wall_time: float = 0.0
    tables: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        return _clean(
            {
                "config": self.config,
                "verdict": self.verdict,
                "error": self.error,
                "metrics": self.metrics,
                "ledger": self.ledger,
                "backend": _kernels.backend(),
                "wall_time": self.wall_time,
            }
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json"]
        written[0].write_text(self.dumps())
        if fmt == "csv":
            for name, (header, rows) in self.tables.items():
                path = out / f"{name}.csv"
                with path.open("w", newline="") as fh:
                    writer = csv.DictWriter(fh, fieldnames=list(header), extrasaction="ignore")
                    writer.writeheader()
                    for row in rows:
                        writer.writerow(_clean(row))
                written.append(path)
        return written


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _concept_class(spec) -> ConceptClass:
    if isinstance(spec, dict):
        return ConceptClass.from_descriptors(spec["concepts"], int(spec["dimension"]), spec.get("name", "explicit"))
    return enumerate_class(spec)


def _rate_check(report: TrialReport, which: str) -> dict:
    rates = report.structure if which == "structure" else report.noise
    lo, hi = rates.interval
    return {
        "rate": rates.rate,
        "wilson_low": lo,
        "wilson_high": hi,
        "count": rates.count,
        "failures": report.failures,
        "threshold": THRESHOLD,
        "pass": lo > THRESHOLD,
    }


def _correlation_refuter(cfg: ExperimentConfig, cls: ConceptClass):
    m = cfg.m if cfg.m is not None else correlation_sample_bound(len(cls), cfg.delta)
    return correlation_refuter(cls, cfg.delta, m, cfg.amplification, cfg.enforce_sample_bound)


def _opt(joint: JointDistribution, cls: ConceptClass) -> dict:
    if not joint.marginal.enumerable:
        return {"opt_correlation": None, "opt_concept": None}
    cor, best = exact_opt_correlation(joint, cls)
    return {"opt_correlation": cor, "opt_error": (1 - cor) / 2, "opt_concept": best.descriptor}


class CountingJoint:
    """Joint-distribution proxy counting every example drawn through it."""

    def __init__(self, joint: JointDistribution):
        self.joint = joint
        self.draws = 0

    def __getattr__(self, name):
        return getattr(self.joint, name)

    def sample(self, rs: RandomnessStream, count: int):
        self.draws += int(count)
        return self.joint.sample(rs, count)


def _trial_table(*reports: TrialReport):
    rows = [row for r in reports for row in r.log]
    return TrialReport.CSV_FIELDS, rows


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _refute_test(cfg, report, rs):
    cls = _concept_class(cfg.class_spec)
    joint = parse_joint(cfg.joint)
    refuter = _correlation_refuter(cfg, cls)
    counted, noise_counted = CountingJoint(joint), CountingJoint(noise_joint(joint.marginal))
    structure = run_refuter_trials(refuter, counted, cfg.trials, rs.child(0), regime="structure")
    noise = run_refuter_trials(refuter, noise_counted, cfg.trials, rs.child(1), regime="noise")
    report.metrics.update(
        m=refuter.m,
        sample_bound=correlation_sample_bound(len(cls), cfg.delta),
        class_size=len(cls),
        **_opt(joint, cls),
        completeness=_rate_check(structure, "structure"),
        soundness=_rate_check(noise, "noise"),
    )
    report.ledger.update(
        structured_draws=counted.draws, noise_draws=noise_counted.draws, refuter_invocations=2 * cfg.trials
    )
    report.tables["trials"] = _trial_table(structure, noise)
    return report.metrics["completeness"]["pass"] and report.metrics["soundness"]["pass"]


def _learner_as_refuter(cfg, report, rs):
    cls = _concept_class(cfg.class_spec)
    joint = parse_joint(cfg.joint)
    learner = erm_learner(cls)
    refuter = learner_to_refuter(learner, cfg.delta, cfg.amplification)
    S = learner.sample_requirement(cfg.delta / 4)
    counted, noise_counted = CountingJoint(joint), CountingJoint(noise_joint(joint.marginal))
    structure = run_refuter_trials(refuter, counted, cfg.trials, rs.child(0), regime="structure")
    noise = run_refuter_trials(refuter, noise_counted, cfg.trials, rs.child(1), regime="noise")
    stats = noise.statistics
    below = float(np.mean(stats < cfg.delta / 2)) if stats.size else 0.0
    report.metrics.update(
        sample_size=refuter.m,
        learner_samples=S,
        expected_sample_size=2 * (S + math.ceil(64 / cfg.delta**2)),
        **_opt(joint, cls),
        completeness=_rate_check(structure, "structure"),
        soundness=_rate_check(noise, "noise"),
        noise_statistic_below_half_delta=below,
        noise_statistic_bound=4 / math.sqrt(refuter.half),
    )
    report.ledger.update(
        structured_draws=counted.draws, noise_draws=noise_counted.draws, refuter_invocations=2 * cfg.trials
    )
    report.tables["trials"] = _trial_table(structure, noise)
    return (
        report.metrics["completeness"]["pass"]
        and report.metrics["soundness"]["pass"]
        and below >= 0.9
        and refuter.m == report.metrics["expected_sample_size"]
    )


def _rademacher(cfg, report, rs):
    cls = _concept_class(cfg.class_spec)
    marginal = parse_joint(cfg.joint).marginal if cfg.joint.startswith("joint") else parse_marginal(cfg.joint)
    est = rademacher_complexity(cls, marginal, cfg.m, cfg.rademacher_mode, cfg.trials, rs)
    report.metrics.update(rademacher=est.to_json(), class_size=len(cls), expected=cfg.expected)
    if cfg.expected is None:
        return True
    tol = cfg.tolerance if est.mode == "exact" else max(cfg.tolerance, est.radius)
    report.metrics["abs_difference"] = abs(est.value - cfg.expected)
    return abs(est.value - cfg.expected) <= tol


def _weak_extract(cfg, report, rs):
    cls = _concept_class(cfg.class_spec)
    joint = parse_joint(cfg.joint)
    refuter = _correlation_refuter(cfg, cls)
    opt_cor, _ = exact_opt_correlation(joint, cls)
    pts, probs, means = joint.support_with_means()
    rows, diag_rows = [], []
    successes = 0
    counted = CountingJoint(joint)
    calls = 0
    for t in range(cfg.trials):
        source = JointSource(counted, rs.child(0, t))
        h, spec, diag = extract_weak_learner(
            refuter, source, None, cfg.K, rs.child(1, t), cfg.context_mode, cfg.c_sel
        )
        exact = float(np.dot(probs * means, h.smoothed(pts, rs.child(2, t))))
        target = spec.gamma * opt_cor - spec.alpha
        successes += exact >= target
        calls += diag.refuter_calls
        rows.append({"extraction": t, "slot": diag.selected_slot, "selection_correlation":
                     diag.to_json()["selected_correlation"], "exact_correlation": exact, "target": target,
                     "pass": exact >= target})
        if t == 0:
            diag_rows = diag.rows()
    fraction = successes / cfg.trials
    report.metrics.update(
        m=refuter.m,
        gamma=spec.gamma,
        alpha=spec.alpha,
        opt_correlation=opt_cor,
        target_correlation=spec.gamma * opt_cor - spec.alpha,
        successes=successes,
        extractions=cfg.trials,
        success_fraction=fraction,
        pass_fraction=cfg.pass_fraction,
    )
    report.ledger.update(structured_draws=counted.draws, refuter_invocations=calls)
    report.tables["extractions"] = (
        ("extraction", "slot", "selection_correlation", "exact_correlation", "target", "pass"), rows)
    report.tables["candidates"] = (ExtractionDiagnostics.CSV_FIELDS, diag_rows)
    return fraction >= cfg.pass_fraction


def _end2end(cfg, report, rs):
    cls = _concept_class(cfg.class_spec)
    joint = parse_joint(cfg.joint)
    refuter = _correlation_refuter(cfg, cls)
    m = refuter.m
    opt_cor, best = exact_opt_correlation(joint, cls)
    opt_error = (1 - opt_cor) / 2

    counted = CountingJoint(joint)
    w0, wend = endpoint_rates(refuter, counted, cfg.trials, rs.child(0), noise=noise_joint(joint.marginal))
    diagnostic_draws = counted.draws
    weak = HybridWeakLearner(refuter, cfg.K, cfg.context_mode, cfg.c_sel)
    spec = weak.spec
    bcfg = BoostConfig(cfg.epsilon, spec.gamma, spec.alpha, **cfg.boost)
    source = JointSource(counted, rs.child(1))
    calls = []

    def weak_counted(src, wrs):
        out = weak(src, wrs)
        calls.append(out[2].refuter_calls)
        return out

    result: BoostResult = boost(weak_counted, source, bcfg, rs.child(2), exact_joint=joint)
    error = evaluate_error(result.hypothesis, joint)
    bound = opt_error + cfg.delta / 2 + cfg.epsilon / 2 + cfg.slack
    baseline = 0.5 - cfg.baseline_margin
    budget = m**3 / cfg.epsilon**2
    report.metrics.update(
        m=m,
        gamma=spec.gamma,
        alpha=spec.alpha,
        boost=bcfg.to_json(),
        opt_correlation=opt_cor,
        opt_error=opt_error,
        opt_concept=best.descriptor,
        endpoint_w0=_rate_check(w0, "structure"),
        endpoint_wend={**_rate_check(wend, "structure"), "pass": wend.structure.interval[1] < 1 / 3},
        endpoint_gap=w0.structure_rate - wend.structure_rate,
        boosted_error=error,
        error_bound=bound,
        baseline_error=0.5,
        baseline_margin=cfg.baseline_margin,
        margin_below_baseline=0.5 - error,
        rounds_run=result.rounds_run,
        rounds_skipped=result.skipped,
    )
    report.ledger.update(
        structured_draws=counted.draws,
        learning_draws=counted.draws - diagnostic_draws,
        diagnostic_draws=diagnostic_draws,
        refuter_invocations=int(sum(calls)) + 2 * cfg.trials,
        budget_m3_over_eps2=budget,
        measured_constant=(counted.draws - diagnostic_draws) / budget,
    )
    report.tables["boost_rounds"] = (BoostResult.CSV_FIELDS, result.log)
    report.tables["endpoint_trials"] = _trial_table(w0, wend)
    return error <= bound and error <= baseline


_PIPELINES = {
    "refute-test": _refute_test,
    "learner-as-refuter": _learner_as_refuter,
    "weak-extract": _weak_extract,
    "rademacher": _rademacher,
    "end2end": _end2end,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one pipeline.  Module errors become a failed report, never a crash."""
    report = ExperimentReport(config=copy.deepcopy(cfg.to_json()))
    rs = RandomnessStream(cfg.seed)
    start = time.perf_counter()
    try:
        passed = _PIPELINES[cfg.experiment](cfg, report, rs)
        report.verdict = "pass" if passed else "fail"
    except (RefuteLabError, ValueError, KeyError) as err:
        report.verdict = "fail"
        report.error = f"{type(err).__name__}: {err}"
        report.metrics.setdefault("traceback", traceback.format_exc(limit=3))
    report.wall_time = time.perf_counter() - start
    return report
