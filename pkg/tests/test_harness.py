import json

import pytest

from refutelab.cli import main
from refutelab.errors import ConfigurationError
from refutelab.harness import DEFAULTS, ExperimentConfig, run_experiment
from refutelab.hybrid import selection_size

SHORT_E2E = {"boost": {"rounds": 20}, "trials": 100}


def _without_wall_time(text):
    data = json.loads(text)
    data.pop("wall_time")
    return data


class TestConfig:
    def test_defaults_fill(self):
        cfg = ExperimentConfig.from_mapping({}, "end2end")
        assert cfg.delta == 0.6 and cfg.m == 16 and cfg.epsilon == 0.3 and cfg.K == 8
        assert cfg.context_mode == "frozen"

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_mapping({"detla": 0.5}, "refute-test")

    def test_unknown_boost_override(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_mapping({"boost": {"speed": 2}}, "end2end")

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_mapping({}, "train")

    def test_yaml_with_explicit_class(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(
            "experiment: refute-test\n"
            "class:\n  dimension: 3\n  concepts: ['dict:+1', 'parity:[1,2]']\n"
            "joint: 'joint{marginal=uniform(3), labels=concept_noisy(\"dict:+1\", 0.1)}'\n"
            "m: 128\ntrials: 60\n"
        )
        cfg = ExperimentConfig.load(path, seed=5)
        assert cfg.seed == 5 and cfg.class_spec["dimension"] == 3
        report = run_experiment(cfg)
        assert report.passed, report.error
        assert report.config == cfg.to_json()


class TestPipelines:
    def test_rademacher(self):
        report = run_experiment(ExperimentConfig.from_mapping({}, "rademacher"))
        assert report.passed
        assert report.metrics["rademacher"]["value"] == 0.375

    def test_rademacher_wrong_expectation_fails(self):
        report = run_experiment(ExperimentConfig.from_mapping({"expected": 0.4}, "rademacher"))
        assert report.verdict == "fail" and report.error is None

    def test_refute_test(self, tmp_path):
        report = run_experiment(ExperimentConfig.from_mapping({"trials": 100}, "refute-test"))
        assert report.passed
        assert report.ledger["structured_draws"] == 100 * 256
        files = report.write(tmp_path)
        assert {p.name for p in files} == {"report.json", "trials.csv"}
        assert (tmp_path / "trials.csv").read_text().splitlines()[0] == "trial,regime,verdict,statistic,seed_path"

    def test_learner_as_refuter(self):
        report = run_experiment(ExperimentConfig.from_mapping({"trials": 60}, "learner-as-refuter"))
        assert report.passed
        assert report.metrics["sample_size"] == report.metrics["expected_sample_size"]

    def test_weak_extract(self):
        report = run_experiment(ExperimentConfig.from_mapping({"trials": 2, "m": 32}, "weak-extract"))
        assert report.passed
        per = 8 * 32 * 31 // 2 + selection_size(32)
        assert report.ledger["structured_draws"] == 2 * per

    def test_module_error_becomes_report(self):
        cfg = ExperimentConfig.from_mapping({"joint": "joint{marginal=uniform(3), labels=rademacher}"}, "refute-test")
        report = run_experiment(cfg)
        assert report.verdict == "fail"
        assert "dimension" in report.error
        json.loads(report.dumps())

    def test_auto_m(self):
        cfg = ExperimentConfig.from_mapping({"m": None, "trials": 30, "delta": 1.0}, "refute-test")
        report = run_experiment(cfg)
        assert report.metrics["m"] == report.metrics["sample_bound"]


@pytest.fixture(scope="module")
def short_reports():
    cfg = ExperimentConfig.from_mapping(SHORT_E2E, "end2end")
    return run_experiment(cfg), run_experiment(cfg)


class TestEnd2End:
    def test_replay(self, short_reports):
        a, b = short_reports
        assert _without_wall_time(a.dumps()) == _without_wall_time(b.dumps())

    def test_ledger_arithmetic(self, short_reports):
        report = short_reports[0]
        m, K = 16, 8
        per_round = K * m * (m - 1) // 2 + selection_size(m)
        assert report.ledger["learning_draws"] == 20 * per_round
        assert report.ledger["diagnostic_draws"] == 100 * m
        assert report.ledger["structured_draws"] == 20 * per_round + 100 * m
        assert report.ledger["budget_m3_over_eps2"] == pytest.approx(16**3 / 0.09)

    def test_predicate(self, short_reports):
        report = short_reports[0]
        err = report.metrics["boosted_error"]
        assert report.passed == (err <= report.metrics["error_bound"] and err <= 0.45)
        assert report.metrics["error_bound"] == pytest.approx(0.1 + 0.3 + 0.15 + 0.02)

    def test_round_log(self, short_reports, tmp_path):
        short_reports[0].write(tmp_path)
        lines = (tmp_path / "boost_rounds.csv").read_text().splitlines()
        assert lines[0] == "round,acceptance_rate,weak_correlation,error,skipped"
        assert len(lines) == 21


class TestCLI:
    def test_pass_exit_code(self, tmp_path, capsys):
        code = main(["rademacher", "--out", str(tmp_path), "--seed", "3"])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["verdict"] == "pass" and report["config"]["seed"] == 3

    def test_fail_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("expected: 0.5\n")
        assert main(["rademacher", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_invalid_config_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("nonsense_key: 1\n")
        assert main(["rademacher", "--config", str(cfg)]) == 2

    def test_json_format_and_trials(self, tmp_path):
        assert main(["refute-test", "--trials", "40", "--format", "json", "--out", str(tmp_path)]) == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json"]
        assert json.loads((tmp_path / "report.json").read_text())["config"]["trials"] == 40

    def test_stdout_report(self, capsys):
        assert main(["rademacher"]) == 0
        assert json.loads(capsys.readouterr().out)["verdict"] == "pass"

    def test_defaults_cover_every_experiment(self):
        assert set(DEFAULTS) == {"refute-test", "learner-as-refuter", "weak-extract", "rademacher", "end2end"}
