import json
import sys
from pathlib import Path

import pytest

import peftt.cli.cli as cli_module
from peftt.cli import run
from peftt.cli.runs import (
    BASE_FILE,
    CHECKPOINT_FILE,
    LABEL_MAP_FILE,
    REPORT_JSON,
    REPORT_TEXT,
    RUN_RECORD,
    VOCAB_FILE,
)
from peftt.exceptions import ConfigError

if sys.version_info < (3, 11):
    from exceptiongroup import ExceptionGroup

QUICK = ["--epochs", "2", "--max-len", "16", "--batch-size", "8"]


def train(tmp_path: Path, *args: str) -> tuple[int, Path]:
    out = tmp_path / "run"
    return run(["train", *args, "--out", str(out), *QUICK]), out


class TestAccount:
    def test_single_model(self, capsys: pytest.CaptureFixture[str]):
        """The cino-small adapter row matches the published count and ratio."""
        assert run(["account", "--model", "cino-small", "--rank", "8"]) == 0
        output = capsys.readouterr().out
        assert "CSA" in output
        assert "258048" in output
        assert "0.174666%" in output

    def test_all_models(self, capsys: pytest.CaptureFixture[str]):
        """Without a model every scenario is listed."""
        assert run(["account", "--no-notes"]) == 0
        output = capsys.readouterr().out
        for name in ("CSW", "CBA", "CLAP", "TP", "TBAP"):
            assert name in output
        assert "0.463499%" in output

    def test_unknown_model(self, capsys: pytest.CaptureFixture[str]):
        """Domain errors exit with 1 and one line on stderr."""
        assert run(["account", "--model", "bert-huge"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: Unknown model 'bert-huge'")

    def test_bad_mode(self):
        """Usage errors exit with 2."""
        assert run(["account", "--mode", "everything"]) == 2


class TestTrain:
    def test_unknown_scenario(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """An unknown abbreviation is reported, not raised."""
        code, _ = train(tmp_path, "--scenario", "XYZ-desk", "--corpus", "synthetic:3x10")
        assert code == 1
        assert "Unknown scenario" in capsys.readouterr().err

    def test_prompt_mode_needs_template(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """A file corpus in prompt mode needs a template and label words."""
        corpus = tmp_path / "corpus.tsv"
        assert run(["synth", "--out", str(corpus), "--classes", "3", "--per-class", "5"]) == 0
        code, _ = train(tmp_path, "--scenario", "TBP-desk", "--corpus", str(corpus))
        assert code == 1
        assert "--template" in capsys.readouterr().err

    def test_conflicting_options(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """--scenario excludes --model and --mode."""
        code, _ = train(tmp_path, "--scenario", "TBA-desk", "--mode", "full", "--corpus", "synthetic:3x10")
        assert code == 1
        assert "cannot be combined" in capsys.readouterr().err

    def test_invalid_value(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """Validation errors name the offending option."""
        code, _ = train(tmp_path, "--scenario", "TBA-desk", "--corpus", "synthetic:3x10", "--rank", "0")
        assert code == 1
        assert "rank" in capsys.readouterr().err

    def test_writes_artifacts(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """A run leaves report, table, vocabulary, run record and checkpoint behind."""
        code, out = train(tmp_path, "--scenario", "TBA-desk", "--corpus", "synthetic:4x10x3", "--seed", "2")
        assert code == 0
        for name in (REPORT_JSON, REPORT_TEXT, VOCAB_FILE, LABEL_MAP_FILE, RUN_RECORD, CHECKPOINT_FILE, BASE_FILE):
            assert (out / name).exists(), name
        report = json.loads((out / REPORT_JSON).read_text(encoding="utf-8"))
        assert report["scenario"] == "TBA-desk"
        assert report["seed"] == 2
        assert report["trainable_parameters"] == 2560
        assert len(report["epochs"]) == 2
        assert "Vev_acc" in capsys.readouterr().out

    def test_repeats_check_options_before_starting(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """Repeated runs report a bad scenario or corpus as one error line without training."""
        code, out = train(tmp_path, "--scenario", "XYZ-desk", "--corpus", "synthetic:3x10", "--repeats", "2")
        assert code == 1
        assert capsys.readouterr().err.startswith("error: Unknown scenario")
        assert not out.exists()

        code, out = train(tmp_path, "--scenario", "TBA-desk", "--corpus", "synthetic:3", "--repeats", "2")
        assert code == 1
        assert "synthetic:CxN" in capsys.readouterr().err
        assert not out.exists()

    def test_repeats_unwrap_worker_errors(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str], monkeypatch: pytest.MonkeyPatch
    ):
        """An error raised inside the task group of repeated runs exits with 1, not a traceback."""

        async def failing(*args: object, **kwargs: object) -> None:
            raise ExceptionGroup("repeats", [ExceptionGroup("inner", [ConfigError("worker failed")])])

        monkeypatch.setattr(cli_module, "run_repeats", failing)
        code, _ = train(tmp_path, "--scenario", "TBA-desk", "--corpus", "synthetic:3x10", "--repeats", "2")
        assert code == 1
        err = capsys.readouterr().err
        assert "error: worker failed" in err
        assert "Traceback" not in err

    def test_warmup_can_be_disabled(self, tmp_path: Path):
        """Without the warm-up an adapter run needs no base file."""
        code, out = train(tmp_path, "--scenario", "TBA-desk", "--corpus", "synthetic:3x10", "--warmup-epochs", "0")
        assert code == 0
        assert (out / CHECKPOINT_FILE).exists()
        assert not (out / BASE_FILE).exists()
        assert run(["eval", "--run-dir", str(out)]) == 0

    def test_label_map_fixes_label_order(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """A label map orders the classes of a file corpus and is written back with the run."""
        corpus = tmp_path / "corpus.tsv"
        assert run(["synth", "--out", str(corpus), "--classes", "3", "--per-class", "10"]) == 0
        labels = tmp_path / "labels.txt"
        labels.write_text("Education\nPolitics\nEconomics\n", encoding="utf-8")
        code, out = train(tmp_path, "--scenario", "TW-desk", "--corpus", str(corpus), "--label-map", str(labels))
        assert code == 0
        report = json.loads((out / REPORT_JSON).read_text(encoding="utf-8"))
        assert report["label_names"] == ["Education", "Politics", "Economics"]
        assert (out / LABEL_MAP_FILE).read_text(encoding="utf-8") == labels.read_text(encoding="utf-8")
        capsys.readouterr()
        assert run(["eval", "--run-dir", str(out)]) == 0
        assert capsys.readouterr().out.startswith("test_acc=")

    def test_label_map_needs_a_file_corpus(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """Synthetic corpora have their own label order."""
        labels = tmp_path / "labels.txt"
        labels.write_text("a\nb\n", encoding="utf-8")
        code, _ = train(tmp_path, "--scenario", "TW-desk", "--corpus", "synthetic:3x10", "--label-map", str(labels))
        assert code == 1
        assert "label map" in capsys.readouterr().err

    def test_model_and_mode(self, tmp_path: Path):
        """An explicit model and mode name the run by its abbreviation."""
        code, out = train(tmp_path, "--model", "tibert-desk", "--mode", "full", "--corpus", "synthetic:3x10")
        assert code == 0
        assert json.loads((out / REPORT_JSON).read_text(encoding="utf-8"))["scenario"] == "TW-desk"

    def test_config_file(self, tmp_path: Path):
        """Options can come from a TOML file; flags override it."""
        config = tmp_path / "run.toml"
        config.write_text('scenario = "CSA-desk"\ncorpus = "synthetic:3x10"\nseed = 4\nrank = 2\n', encoding="utf-8")
        code, out = train(tmp_path, "--config", str(config), "--rank", "4")
        assert code == 0
        report = json.loads((out / REPORT_JSON).read_text(encoding="utf-8"))
        assert report["seed"] == 4
        assert report["trainable_parameters"] == 4 * 320


class TestEval:
    @pytest.mark.parametrize("scenario", ["TW-desk", "TBAP-desk"])
    def test_matches_training_report(self, tmp_path: Path, capsys: pytest.CaptureFixture[str], scenario: str):
        """Re-evaluating a saved run reproduces the reported test metrics."""
        code, out = train(tmp_path, "--scenario", scenario, "--corpus", "synthetic:4x10x3", "--seed", "3")
        assert code == 0
        report = json.loads((out / REPORT_JSON).read_text(encoding="utf-8"))
        capsys.readouterr()

        assert run(["eval", "--run-dir", str(out), "--split", "test"]) == 0
        expected = f"test_acc={report['test_acc']:.6f} test_macro_f1={report['test_macro_f1']:.6f}"
        assert capsys.readouterr().out.strip() == expected

        assert run(["eval", "--run-dir", str(out), "--split", "validation"]) == 0
        expected = f"validation_acc={report['val_acc']:.6f} validation_macro_f1={report['val_macro_f1']:.6f}"
        assert capsys.readouterr().out.strip() == expected

    def test_file_corpus_round_trip(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """Runs on corpus files are re-evaluated from the same files."""
        corpus = tmp_path / "corpus.tsv"
        assert run(["synth", "--out", str(corpus), "--classes", "3", "--per-class", "10", "--seed", "1"]) == 0
        code, out = train(tmp_path, "--scenario", "CBA-desk", "--corpus", str(corpus))
        assert code == 0
        report = json.loads((out / REPORT_JSON).read_text(encoding="utf-8"))
        capsys.readouterr()
        assert run(["eval", "--run-dir", str(out)]) == 0
        assert capsys.readouterr().out.strip() == (
            f"test_acc={report['test_acc']:.6f} test_macro_f1={report['test_macro_f1']:.6f}"
        )

    def test_corrupt_checkpoint(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """A checkpoint with a bad magic is rejected."""
        code, out = train(tmp_path, "--scenario", "TW-desk", "--corpus", "synthetic:3x10")
        assert code == 0
        checkpoint = out / CHECKPOINT_FILE
        checkpoint.write_bytes(b"XXXXX" + checkpoint.read_bytes()[5:])
        capsys.readouterr()
        assert run(["eval", "--run-dir", str(out)]) == 1
        assert "bad magic" in capsys.readouterr().err

    def test_unknown_split(self, tmp_path: Path):
        """Only train, validation and test can be evaluated."""
        assert run(["eval", "--run-dir", str(tmp_path), "--split", "dev"]) == 2

    def test_missing_run_dir(self, tmp_path: Path):
        """The run directory must exist."""
        assert run(["eval", "--run-dir", str(tmp_path / "missing")]) == 2


class TestSynth:
    def test_writes_tsv(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        """The synthetic corpus is written as label<TAB>title lines."""
        out = tmp_path / "corpus.tsv"
        assert run(["synth", "--out", str(out), "--classes", "4", "--per-class", "3", "--weights", "1,1,1,2"]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 15
        assert all(line.count("\t") == 1 for line in lines)
        assert "wrote 15 titles in 4 classes" in capsys.readouterr().out


def test_version(capsys: pytest.CaptureFixture[str]):
    """The version command always succeeds."""
    assert run(["version"]) == 0
    assert capsys.readouterr().out.startswith("peftt version")
