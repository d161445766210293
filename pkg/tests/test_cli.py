import json

import pytest

from click.testing import CliRunner

from referral_forge.cli import main as cli_main
from referral_forge.config import ENV_CONFIG_VAR, load_config
from conftest import make_workspace, run_cli


class TestFullChain:
    def test_artifacts_exist_after_pipeline(self, workspace):
        config = load_config(workspace)
        for name in (
            "requests.jsonl",
            "split.json",
            "model.json",
            "cv_report.json",
            "metrics_report.json",
            "calibration.csv",
            "prob_stats.json",
            "index.bin",
            "index_meta.json",
            "policy.json",
            "ratings.jsonl",
        ):
            assert config.artifact(name).exists(), name

    def test_planted_signal_learned(self, workspace):
        config = load_config(workspace)
        report = json.loads(config.artifact("metrics_report.json").read_text())
        rows = {row["model"]: row for row in report["rows"]}
        assert rows["random_baseline"]["auroc"]["value"] == 0.5
        model_row = [r for name, r in rows.items() if name != "random_baseline"][0]
        assert model_row["auroc"]["value"] > 0.5

    def test_prob_stats_shape(self, workspace):
        config = load_config(workspace)
        stats = json.loads(config.artifact("prob_stats.json").read_text())
        assert set(stats) == {"mean", "std", "min", "max", "count", "percentiles"}
        assert set(stats["percentiles"]) == {"1", "5", "10", "25", "50", "75", "90", "95", "99"}


class TestErrorPaths:
    def test_evaluate_before_train_names_model_artifact(self, tmp_path):
        config_path = make_workspace(tmp_path)
        result = run_cli(config_path, "ingest")
        assert result.exit_code == 0
        result = run_cli(config_path, "evaluate")
        assert result.exit_code != 0
        assert "model.json" in result.output

    def test_unknown_flag_exits_2_with_usage(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["ingest", "--no-such-flag"])
        assert result.exit_code == 2
        assert "Usage" in result.output or "no such option" in result.output.lower()

    def test_missing_inputs_reported(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"posts_path": str(tmp_path / "absent.jsonl")}))
        result = run_cli(config_path, "ingest")
        assert result.exit_code != 0
        assert "absent.jsonl" in result.output

    def test_unknown_config_key_rejected(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"no_such_key": 1}))
        result = run_cli(config_path, "ingest")
        assert result.exit_code != 0
        assert "unknown config keys" in result.output


class TestSingleRequestCommands:
    def test_explain_by_id(self, workspace):
        config = load_config(workspace)
        first_id = json.loads(
            config.artifact("requests.jsonl").read_text().splitlines()[0]
        )["id"]
        result = run_cli(workspace, "explain", "--id", first_id)
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["id"] == first_id
        assert payload["ratings"]["overall"] in ("weak", "moderate", "strong")

    def test_explain_adhoc_text(self, workspace):
        result = run_cli(
            workspace, "explain", "--title", "Need a referral",
            "--body", "I am a software engineer in Seattle. Thank you!",
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert "[ROLE]" in json.dumps(payload["spans"])

    def test_revise_echo(self, workspace):
        config = load_config(workspace)
        first_id = json.loads(
            config.artifact("requests.jsonl").read_text().splitlines()[0]
        )["id"]
        result = run_cli(workspace, "revise", "--id", first_id, "--mode", "basic")
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["delta"] == 0.0

    def test_explain_needs_id_or_text(self, workspace):
        result = run_cli(workspace, "explain")
        assert result.exit_code != 0
        assert "--id" in result.output


class TestBatchEval:
    def test_rag_with_top_example_stub(self, workspace):
        result = run_cli(
            workspace, "batch-eval", "--mode", "rag", "--provider", "stub-top-example"
        )
        assert result.exit_code == 0, result.output
        config = load_config(workspace)
        for name in ("outcomes.jsonl", "workflow_report.json", "lowess.csv", "deciles.csv"):
            assert config.artifact(name).exists()
        report = json.loads(config.artifact("workflow_report.json").read_text())
        assert report["workflow"] == "rag"
        assert set(report["groups"]) == {"lower_half", "upper_half", "overall"}

    def test_deterministic_across_runs(self, workspace):
        config = load_config(workspace)
        artifacts = ["outcomes.jsonl", "workflow_report.json", "lowess.csv", "deciles.csv"]
        result = run_cli(workspace, "batch-eval", "--mode", "basic", "--provider", "stub-echo")
        assert result.exit_code == 0, result.output
        first = {name: config.artifact(name).read_bytes() for name in artifacts}
        result = run_cli(workspace, "batch-eval", "--mode", "basic", "--provider", "stub-echo")
        assert result.exit_code == 0
        second = {name: config.artifact(name).read_bytes() for name in artifacts}
        assert first == second

    def test_echo_all_deltas_zero(self, workspace):
        run_cli(workspace, "batch-eval", "--mode", "basic", "--provider", "stub-echo")
        config = load_config(workspace)
        outcomes = [
            json.loads(line)
            for line in config.artifact("outcomes.jsonl").read_text().splitlines()
        ]
        assert all(o["delta"] == 0.0 for o in outcomes)


class TestAlternateEncoders:
    @pytest.mark.parametrize("encoder", ["tfidf", "featurized"])
    def test_train_and_evaluate(self, tmp_path, encoder):
        config_path = make_workspace(
            tmp_path, n_train=100, n_test=30, grid_size=2, cv_folds=2, encoder=encoder
        )
        for step in (["ingest"], ["train"], ["evaluate"]):
            result = run_cli(config_path, *step)
            assert result.exit_code == 0, f"{step}: {result.output}"
        config = load_config(config_path)
        report = json.loads(config.artifact("metrics_report.json").read_text())
        model_row = [r for r in report["rows"] if r["model"] != "random_baseline"][0]
        assert model_row["auroc"]["value"] > 0.5
        model = json.loads(config.artifact("model.json").read_text())
        assert model["encoder_id"].startswith(encoder)
        if encoder == "tfidf":
            assert config.artifact("tfidf_vocab.json").exists()
        if encoder == "featurized":
            # 21 semantic flags + 4 linguistic numerics
            assert len(model["weights"]) == 25


class TestDemoCorpus:
    def test_writes_inputs(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["demo-corpus", "--out-dir", str(tmp_path), "--n-train", "30", "--n-test", "10"],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "posts.jsonl").exists()
        assert (tmp_path / "comments.jsonl").exists()


class TestConfigEnvVar:
    def test_env_var_supplies_config(self, workspace, monkeypatch):
        monkeypatch.setenv(ENV_CONFIG_VAR, str(workspace))
        runner = CliRunner()
        result = runner.invoke(cli_main, ["explain", "--title", "Need a referral", "--body", "Thanks."])
        assert result.exit_code == 0, result.output
