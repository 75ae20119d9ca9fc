import json
import subprocess
import sys

import pytest

from channelqc.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small simulated scanner, a trained forest and one completed run."""
    root = tmp_path_factory.mktemp("cli")
    sim = root / "sim"
    trained = root / "trained"
    run = root / "run"
    assert run_cli("simulate", "--channels", 256, "--rings", 4, "--major", 12,
                   "--per-level", 2, "--seed", 42, "--out-dir", sim) == 0
    assert run_cli("train", "--channels", 256, "--rings", 4, "--major", 20,
                   "--per-level", 4, "--trees", 30, "--seed", 7,
                   "--out-dir", trained) == 0
    assert run_cli("run", "--in-dir", sim, "--forest", trained / "forest.json",
                   "--out-dir", run, "--seed", 42) == 0
    return {"root": root, "sim": sim, "trained": trained, "run": run}


class TestSimulate:
    def test_outputs_exist_with_manifest(self, workspace):
        sim = workspace["sim"]
        for name in ("scanner_config.csv", "observables.csv", "labels.csv",
                     "baseline.csv", "manifest.json"):
            assert (sim / name).exists()
        manifest = json.loads((sim / "manifest.json").read_text())
        first = (sim / "observables.csv").read_text().splitlines()[0]
        assert manifest["manifest_hash"] in first

    def test_byte_identical_reruns(self, tmp_path):
        for name in ("a", "b"):
            assert run_cli("simulate", "--channels", 64, "--rings", 4, "--major", 3,
                           "--seed", 9, "--out-dir", tmp_path / name) == 0
        for f in ("scanner_config.csv", "observables.csv", "labels.csv",
                  "baseline.csv", "manifest.json"):
            assert read_bytes(tmp_path / "a" / f) == read_bytes(tmp_path / "b" / f)

    def test_nominal_mini_scanner(self, tmp_path):
        assert run_cli("simulate", "--channels", 8, "--rings", 2, "--major", 0,
                       "--out-dir", tmp_path) == 0
        labels = (tmp_path / "labels.csv").read_text().splitlines()
        assert len(labels) == 2  # comment + header only


class TestRun:
    def test_outputs(self, workspace):
        run = workspace["run"]
        for name in ("extracted.csv", "features.csv", "diagnosis.csv", "ranking.csv",
                     "priorities.csv", "manifest.json", "scanner_config.csv"):
            assert (run / name).exists()

    def test_run_parent_lineage(self, workspace):
        sim_hash = json.loads(
            (workspace["sim"] / "manifest.json").read_text())["manifest_hash"]
        run_manifest = json.loads((workspace["run"] / "manifest.json").read_text())
        assert run_manifest["parent_hash"] == sim_hash
        first = (workspace["run"] / "diagnosis.csv").read_text().splitlines()[0]
        assert f"parent: {sim_hash}" in first

    def test_nominal_scanner_gives_empty_ranking(self, tmp_path, workspace):
        sim = tmp_path / "sim"
        out = tmp_path / "run"
        assert run_cli("simulate", "--channels", 256, "--rings", 4, "--major", 0,
                       "--seed", 8, "--out-dir", sim) == 0
        assert run_cli("run", "--in-dir", sim, "--forest",
                       workspace["trained"] / "forest.json", "--out-dir", out) == 0
        lines = (out / "ranking.csv").read_text().splitlines()
        assert len(lines) == 2  # comment + header, no data rows

    def test_higher_threshold_is_subset(self, tmp_path, workspace):
        out_hi = tmp_path / "hi"
        assert run_cli("run", "--in-dir", workspace["sim"], "--forest",
                       workspace["trained"] / "forest.json", "--out-dir", out_hi,
                       "--threshold", 0.9) == 0

        def detected_channels(run_dir):
            rows = (run_dir / "ranking.csv").read_text().splitlines()[2:]
            return {int(r.split(",")[1]) for r in rows}

        assert detected_channels(out_hi) <= detected_channels(workspace["run"])

    def test_missing_input_exits_config(self, tmp_path, workspace, capsys):
        code = run_cli("run", "--in-dir", tmp_path / "nope", "--forest",
                       workspace["trained"] / "forest.json", "--out-dir", tmp_path)
        assert code == 3
        assert "not found" in capsys.readouterr().err

    def test_invalid_config_dir_exits_config(self, tmp_path, workspace, capsys):
        bad = tmp_path / "config"
        bad.mkdir()
        (bad / "fuzzy_priority.cfg").write_text("INPUT health RANGE 0 1\n")
        (bad / "diagnosis_rules.txt").write_text("RULE x\n")
        code = run_cli("run", "--in-dir", workspace["sim"], "--forest",
                       workspace["trained"] / "forest.json", "--out-dir", tmp_path,
                       "--config-dir", bad)
        assert code == 3

    def test_shipped_config_dir_works(self, tmp_path, workspace):
        assert run_cli("run", "--in-dir", workspace["sim"], "--forest",
                       workspace["trained"] / "forest.json",
                       "--out-dir", tmp_path / "out", "--config-dir", "config") == 0


class TestEval:
    def test_full_report(self, workspace, tmp_path):
        out = tmp_path / "eval"
        assert run_cli("eval", "--diagnosis", workspace["run"] / "diagnosis.csv",
                       "--labels", workspace["sim"] / "labels.csv",
                       "--priorities", workspace["run"] / "priorities.csv",
                       "--out-dir", out) == 0
        report = json.loads((out / "report.json").read_text())
        for section in ("global", "per_level", "severity", "priority_correlation",
                        "boxplots"):
            assert section in report
        assert report["global"]["sensitivity"] is not None
        for table in ("per_level.csv", "severity.csv", "boxplots.csv"):
            assert (out / table).exists()

    def test_empty_campaign_report(self, tmp_path, workspace):
        sim = tmp_path / "sim"
        run = tmp_path / "run"
        out = tmp_path / "eval"
        assert run_cli("simulate", "--channels", 64, "--rings", 4, "--major", 0,
                       "--seed", 5, "--out-dir", sim) == 0
        assert run_cli("run", "--in-dir", sim, "--forest",
                       workspace["trained"] / "forest.json", "--out-dir", run) == 0
        assert run_cli("eval", "--diagnosis", run / "diagnosis.csv",
                       "--labels", sim / "labels.csv", "--out-dir", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["global"]["sensitivity"] is None
        assert report["global"]["specificity"] is not None

    def test_mixed_manifests_refused(self, tmp_path, workspace, capsys):
        other_sim = tmp_path / "other"
        assert run_cli("simulate", "--channels", 256, "--rings", 4, "--major", 5,
                       "--seed", 1234, "--out-dir", other_sim) == 0
        code = run_cli("eval", "--diagnosis", workspace["run"] / "diagnosis.csv",
                       "--labels", other_sim / "labels.csv", "--out-dir", tmp_path)
        assert code == 3
        assert "different runs" in capsys.readouterr().err

    def test_missing_channels_listed(self, tmp_path, workspace, capsys):
        truncated = tmp_path / "diagnosis.csv"
        lines = (workspace["run"] / "diagnosis.csv").read_text().splitlines()
        labeled = {int(r.split(",")[0]) for r in
                   (workspace["sim"] / "labels.csv").read_text().splitlines()[2:]}
        keep = [l for l in lines if not l.split(",")[0].isdigit()
                or int(l.split(",")[0]) not in labeled]
        truncated.write_text("\n".join(keep) + "\n")
        code = run_cli("eval", "--diagnosis", truncated,
                       "--labels", workspace["sim"] / "labels.csv",
                       "--out-dir", tmp_path)
        assert code == 3
        err = capsys.readouterr().err
        assert "missing from the diagnosis export" in err


class TestTrain:
    def test_forest_file_embeds_manifest_hash(self, workspace):
        manifest = json.loads((workspace["trained"] / "manifest.json").read_text())
        forest_data = json.loads((workspace["trained"] / "forest.json").read_text())
        assert forest_data["manifest_hash"] == manifest["manifest_hash"]


class TestRetrain:
    def test_retrain_from_history(self, tmp_path, workspace):
        history = tmp_path / "history.jsonl"
        assert run_cli("train", "--channels", 128, "--rings", 4, "--major", 10,
                       "--per-level", 2, "--trees", 10, "--seed", 2,
                       "--out-dir", tmp_path / "t", "--history", history) == 0
        out = tmp_path / "forest2.json"
        assert run_cli("retrain", "--history", history, "--out", out,
                       "--trees", 10, "--seed", 2) == 0
        assert out.exists()

    def test_retrain_empty_history_exits_config(self, tmp_path, capsys):
        from channelqc.history import HistoryStore

        history = tmp_path / "empty.jsonl"
        HistoryStore(history)
        code = run_cli("retrain", "--history", history, "--out", tmp_path / "f.json")
        assert code == 3
        assert "no labeled examples" in capsys.readouterr().err

    def test_eval_report_embeds_campaign_seed(self, tmp_path, workspace):
        out = tmp_path / "eval"
        assert run_cli("eval", "--diagnosis", workspace["run"] / "diagnosis.csv",
                       "--labels", workspace["sim"] / "labels.csv",
                       "--out-dir", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["campaign_seed"] == 42


class TestUsage:
    def test_unknown_flag_exits_two(self):
        proc = subprocess.run(
            [sys.executable, "-m", "channelqc.cli", "simulate", "--bogus"],
            capture_output=True)
        assert proc.returncode == 2

    def test_missing_subcommand_exits_two(self):
        proc = subprocess.run([sys.executable, "-m", "channelqc.cli"],
                              capture_output=True)
        assert proc.returncode == 2

    def test_console_script_help(self):
        proc = subprocess.run(["channelqc", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "simulate" in proc.stdout
