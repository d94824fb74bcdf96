"""Command-line interface: exit codes, artifacts, and error tagging."""

import json

import pytest
from click.testing import CliRunner

from batchcorrect.cli import main
from batchcorrect.corpus import load_corpus

GEN_ARGS = ["--vocab", "25", "--words", "200", "--dim", "8", "--seed", "7"]


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def generated(runner, tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "data"
    result = runner.invoke(main, ["gen", *GEN_ARGS, "-o", str(out)])
    assert result.exit_code == 0, result.output
    return root, out


class TestGen:
    def test_writes_corpus_and_word_lists(self, generated):
        _, out = generated
        names = ["corpus.jsonl", "corpus.jsonl.emb", "corpus.jsonl.meta.json",
                 "dictionary.txt", "withheld.txt"]
        for name in names:
            assert (out / name).exists(), name
        corpus = load_corpus(out / "corpus.jsonl")
        assert len(corpus) == 200
        assert corpus.embeddings is not None
        words = (out / "dictionary.txt").read_text(encoding="utf-8").split()
        withheld = (out / "withheld.txt").read_text(encoding="utf-8").split()
        assert len(words) + len(withheld) == 25
        assert not set(words) & set(withheld)

    def test_rerun_is_byte_identical(self, runner, generated, tmp_path):
        _, out = generated
        result = runner.invoke(main, ["gen", *GEN_ARGS, "-o", str(tmp_path)])
        assert result.exit_code == 0
        for name in ["corpus.jsonl", "corpus.jsonl.emb", "dictionary.txt", "withheld.txt"]:
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    def test_bad_config_is_tagged(self, runner, tmp_path):
        result = runner.invoke(main, ["gen", "--accuracy", "2.0", "-o", str(tmp_path)])
        assert result.exit_code != 0
        assert "[config]" in result.output


class TestDetect:
    def test_reports_flags_and_categories(self, runner, generated):
        root, out = generated
        ids_path = root / "flagged.txt"
        result = runner.invoke(
            main,
            [
                "detect",
                "--corpus", str(out / "corpus.jsonl"),
                "--dictionary", str(out / "dictionary.txt"),
                "-o", str(ids_path),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "flagged" in result.output
        assert "efp=" in result.output and "tn=" in result.output
        flagged_count = int(result.output.split("flagged ")[1].split(" of")[0])
        assert len(ids_path.read_text(encoding="utf-8").splitlines()) == flagged_count

    def test_missing_dictionary_file_fails_cleanly(self, runner, generated):
        _, out = generated
        result = runner.invoke(
            main,
            [
                "detect",
                "--corpus", str(out / "corpus.jsonl"),
                "--dictionary", str(out / "nope.txt"),
            ],
        )
        assert result.exit_code != 0


class TestCluster:
    def test_writes_clustering_file(self, runner, generated):
        root, out = generated
        clustering_path = root / "clustering.jsonl"
        result = runner.invoke(
            main,
            [
                "cluster",
                "--corpus", str(out / "corpus.jsonl"),
                "--dictionary", str(out / "dictionary.txt"),
                "--method", "mst",
                "-o", str(clustering_path),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "mst:" in result.output and "purity" in result.output
        assert clustering_path.exists()


class TestCorrect:
    def test_runs_the_pipeline(self, runner, generated):
        root, out = generated
        run_dir = root / "run"
        result = runner.invoke(
            main,
            [
                "correct",
                "--corpus", str(out / "corpus.jsonl"),
                "--dictionary", str(out / "dictionary.txt"),
                "--method", "mst",
                "--mode", "oracle",
                "-o", str(run_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "relative to typing:" in result.output
        for name in ["clustering.jsonl", "corrected.jsonl", "actions.jsonl", "report.txt", "manifest.json"]:
            assert (run_dir / name).exists(), name

    def test_malformed_costs_are_tagged(self, runner, generated):
        _, out = generated
        result = runner.invoke(
            main,
            [
                "correct",
                "--corpus", str(out / "corpus.jsonl"),
                "--dictionary", str(out / "dictionary.txt"),
                "--costs", "1;5;15",
                "-o", "unused",
            ],
        )
        assert result.exit_code != 0
        assert "[config]" in result.output


@pytest.fixture(scope="module")
def grid_dir(runner, generated):
    root, out = generated
    grid = root / "grid"
    result = runner.invoke(
        main,
        [
            "simulate",
            "--corpus", str(out / "corpus.jsonl"),
            "--dictionary", str(out / "dictionary.txt"),
            "--methods", "mst",
            "--modes", "auto,oracle",
            "--dictionary-modes", "static",
            "-o", str(grid),
        ],
    )
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0].startswith("method")
    return grid


class TestSimulateAndReport:
    def test_one_run_directory_per_combination(self, grid_dir):
        manifests = sorted(p.parent.name for p in grid_dir.glob("*/manifest.json"))
        assert manifests == ["mst__auto__static", "mst__oracle__static"]
        manifest = json.loads((grid_dir / "mst__auto__static" / "manifest.json").read_text())
        assert manifest["config"]["mode"] == "auto"

    def test_report_renders_runs_table(self, runner, grid_dir):
        result = runner.invoke(main, ["report", "--runs", str(grid_dir)])
        assert result.exit_code == 0, result.output
        assert "auto/static" in result.output and "oracle/static" in result.output
        assert "mst" in result.output

    def test_report_without_inputs_fails(self, runner):
        result = runner.invoke(main, ["report"])
        assert result.exit_code != 0
        assert "--runs and/or --scaling" in result.output


class TestScale:
    def test_writes_series_and_prints_summary(self, runner, tmp_path):
        out = tmp_path / "scaling"
        result = runner.invoke(
            main,
            [
                "scale",
                "--vocab", "15",
                "--dim", "6",
                "--seed", "5",
                "--sizes", "40,80",
                "--eval-size", "30",
                "--method", "mst",
                "-o", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert (out / "scaling.tsv").exists()
        assert "size 40:" in result.output and "size 80:" in result.output
        assert "rank correlation" in result.output
        scaling_report = runner.invoke(main, ["report", "--scaling", str(out / "scaling.tsv")])
        assert scaling_report.exit_code == 0
        assert "mean_accuracy_after" in scaling_report.output


class TestServe:
    def test_bad_artifacts_fail_before_binding(self, runner, generated, tmp_path):
        _, out = generated
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        result = runner.invoke(
            main,
            [
                "serve",
                "--corpus", str(out / "corpus.jsonl"),
                "--clustering", str(empty),
                "--dictionary", str(out / "dictionary.txt"),
            ],
        )
        assert result.exit_code != 0
        assert "[serve]" in result.output


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "batchcorrect" in result.output
