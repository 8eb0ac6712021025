"""Command surface over the bundled replay fixture."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from patch_critic.cli import main
from patch_critic.config import RunConfig, load_config_file

from conftest import cli_args


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines() if line]


class TestIngest:
    def test_summary_written(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        assert main(["ingest", *cli_args(e2e_paths, str(out))]) == 0
        summary = json.loads((out / "ingest.json").read_text())
        assert summary["instances"] == 10
        assert summary["workflows"] == ["alpha", "beta"]
        assert summary["labeled_instances"] == 10

    def test_bad_dataset_exits_nonzero(self, e2e_paths, tmp_path, capsys):
        args = cli_args(e2e_paths, str(tmp_path / "out"))
        args[1] = str(tmp_path / "nope.jsonl")
        assert main(["ingest", *args]) == 1
        err = capsys.readouterr().err
        assert "error:" in err
        record = json.loads(err.strip().splitlines()[-1])
        assert record["command"] == "ingest"
        assert record["error_type"] == "DatasetError"


class TestExtractTests:
    def test_two_tests_per_instance(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        assert main(["extract-tests", *cli_args(e2e_paths, str(out))]) == 0
        records = read_jsonl(out / "tests.jsonl")
        assert len(records) == 20
        assert all(rec["complexity"] > 0 for rec in records)


class TestEnhance:
    def test_enhanced_patches_cover_functions(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        assert main(["enhance", *cli_args(e2e_paths, str(out))]) == 0
        records = read_jsonl(out / "enhanced.jsonl")
        assert len(records) == 20
        # Function-level context: the widened hunk shows the whole module body.
        assert any("def total(items):" in rec["patch"] for rec in records)


class TestEvaluate:
    def test_verdict_per_instance_test(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["evaluate", "--variant", "isolated_test_patch", *cli_args(e2e_paths, str(out))]
        )
        assert code == 0
        records = read_jsonl(out / "verdicts" / "isolated_test_patch.jsonl")
        assert len(records) == 40  # 10 instances x 2 workflows x 2 tests
        keys = [(r["instance_id"], r["workflow"], r["test_id"]) for r in records]
        assert keys == sorted(keys)
        assert len(set(keys)) == 40

    def test_offline_cache_miss_fails(self, e2e_paths, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            [
                "evaluate",
                "--variant",
                "isolated_test_patch",
                *cli_args(e2e_paths, str(out)),
                "--model",
                "some-other-model",
            ]
        )
        assert code == 1
        assert "CacheMissError" in capsys.readouterr().err


class TestAggregate:
    def test_all_pass_rule_obeyed(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out))
        assert main(["evaluate", "--variant", "isolated_test_patch", *args]) == 0
        assert main(["aggregate", "--variant", "isolated_test_patch", *args]) == 0
        predictions = read_jsonl(out / "predictions" / "isolated_test_patch.jsonl")
        assert len(predictions) == 20
        for row in predictions:
            per_test = row["per_test"]
            expected = "success" if all(v == "pass" for v in per_test.values()) else "failure"
            assert row["status"] == expected
            rate = sum(1 for v in per_test.values() if v == "pass") / len(per_test)
            assert row["pass_rate"] == pytest.approx(rate)

    def test_forced_tests_recorded(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out))
        main(["evaluate", "--variant", "isolated_test_patch", *args])
        main(["aggregate", "--variant", "isolated_test_patch", *args])
        predictions = read_jsonl(out / "predictions" / "isolated_test_patch.jsonl")
        forced = [
            (r["instance_id"], r["workflow"], t)
            for r in predictions
            for t in r["forced_tests"]
        ]
        assert forced == [
            ("fix-widget-010", "alpha", "tests/test_widget_10.py::test_total_scaled")
        ]


class TestRank:
    def test_rankings_with_baseline(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out))
        main(["evaluate", "--variant", "isolated_test_patch", *args])
        main(["aggregate", "--variant", "isolated_test_patch", *args])
        code = main(
            [
                "rank",
                "--variant",
                "isolated_test_patch",
                "--edit-distance-baseline",
                "--embeddings",
                e2e_paths["embeddings"],
                *args,
            ]
        )
        assert code == 0
        rankings = read_jsonl(out / "rankings" / "isolated_test_patch.jsonl")
        assert len(rankings) == 10
        assert all("edit_distance_rho" in row for row in rankings)

    def test_fewer_than_two_workflows_is_usage_error(self, e2e_paths, tmp_path, capsys):
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out))
        main(["evaluate", "--variant", "isolated_test_patch", *args])
        main(["aggregate", "--variant", "isolated_test_patch", *args])
        predictions_path = out / "predictions" / "isolated_test_patch.jsonl"
        only_alpha = [
            row
            for row in read_jsonl(predictions_path)
            if row["workflow"] == "alpha"
        ]
        predictions_path.write_text(
            "".join(json.dumps(r, sort_keys=True) + "\n" for r in only_alpha)
        )
        code = main(["rank", "--variant", "isolated_test_patch", *args])
        assert code == 2
        assert "at least 2 workflows" in capsys.readouterr().err


class TestReport:
    def test_report_files_written(self, e2e_paths, tmp_path):
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out))
        main(["evaluate", "--variant", "isolated_test_patch", *args])
        main(["aggregate", "--variant", "isolated_test_patch", *args])
        assert main(["report", "--variant", "isolated_test_patch", *args]) == 0
        report_dir = out / "report"
        for name in (
            "report_isolated_test_patch.json",
            "metrics_isolated_test_patch.jsonl",
            "report_isolated_test_patch.txt",
            "pass_rate_hist_isolated_test_patch.csv",
            "rho_isolated_test_patch.csv",
        ):
            assert (report_dir / name).exists()
        metric_rows = read_jsonl(report_dir / "metrics_isolated_test_patch.jsonl")
        assert len(metric_rows) == 4  # {micro, macro} x {alpha, beta}
        assert {r["scope"] for r in metric_rows} == {"micro", "macro"}

    def test_missing_stage_reports_cleanly(self, e2e_paths, tmp_path, capsys):
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out))
        code = main(["aggregate", "--variant", "isolated_test_patch", *args])
        assert code == 1
        assert "run the earlier stage first" in capsys.readouterr().err


class TestConfigFile:
    def test_config_file_supplies_defaults(self, e2e_paths, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text(
            "concurrency = 2\n"
            "model_id = critic-model-1\n"
            "offline = true\n"
            "# a comment\n"
            "complexity_unit = chars\n"
        )
        values = load_config_file(conf)
        cfg = RunConfig(**values)
        assert cfg.concurrency == 2
        assert cfg.offline is True
        assert cfg.model_id == "critic-model-1"

    def test_unknown_key_rejected(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("tempo = fast\n")
        from patch_critic.config import ConfigError

        with pytest.raises(ConfigError, match="unknown key"):
            load_config_file(conf)

    def test_flags_override_config_file(self, e2e_paths, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("concurrency = 7\n")
        out = tmp_path / "out"
        args = cli_args(e2e_paths, str(out), "--config", str(conf), "--concurrency", "3")
        assert main(["extract-tests", *args]) == 0
