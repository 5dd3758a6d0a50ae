"""Run configuration and the artifacts a training run leaves on disk."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from peftt.checkpoint import load_checkpoint, save_checkpoint
from peftt.data.corpus import CorpusSplits, load_label_map, load_presplit, load_tncc, split, write_label_map
from peftt.data.synthetic import TIBETAN_LABEL_WORDS, synthesize_corpus
from peftt.exceptions import ConfigError
from peftt.model.adapters import AdapterMode
from peftt.model.config import MODEL_CATALOG
from peftt.prompts.base import Template, Verbalizer
from peftt.prompts.manager import PromptManager
from peftt.text.tokenizer import Tokenizer
from peftt.text.vocab import Vocabulary
from peftt.training.scenarios import DESK_SUFFIX, Mode, Scenario, abbreviation_for, default_batch_size
from peftt.training.trainer import ClassificationPipeline, Trainer, TrainReport, evaluate
from peftt.utilities.logging import get_logger

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = get_logger(__name__)

SYNTHETIC_PREFIX = "synthetic:"
SYNTHETIC_TEMPLATE = "tibetan-news"

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"
RUN_RECORD = "run.json"
VOCAB_FILE = "vocab.txt"
LABEL_MAP_FILE = "labels.txt"
CHECKPOINT_FILE = "checkpoint.peftt"
BASE_FILE = "base.peftt"

SplitName = Literal["train", "validation", "test"]


class RunConfig(BaseModel):
    """Options of one `train` invocation, from flags and an optional TOML file."""

    model_config = ConfigDict(extra="forbid")

    scenario: str | None = None
    model: str | None = None
    mode: Mode | None = None
    rank: int = Field(default=8, ge=1)
    lr: float | None = Field(default=None, gt=0)
    batch_size: int | None = Field(default=None, ge=1)
    epochs: int = Field(default=30, ge=1)
    max_len: int = Field(default=108, ge=2)
    seed: int = Field(default=0, ge=0, lt=2**24)
    corpus: str
    template: Path | None = None
    verbalizer: Path | None = None
    delimiter: str = "\t"
    label_map: Path | None = None
    repeats: int = Field(default=1, ge=1)
    adapter_mode: AdapterMode = "parallel_lora"
    warmup_epochs: int | None = Field(default=None, ge=0)
    warmup_lr: float | None = Field(default=None, gt=0)

    def to_scenario(self) -> Scenario:
        overrides: dict[str, Any] = {
            "lr": self.lr,
            "epochs": self.epochs,
            "max_len": self.max_len,
            "rank": self.rank,
            "adapter_mode": self.adapter_mode,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "warmup_epochs": self.warmup_epochs,
            "warmup_lr": self.warmup_lr,
        }
        if self.scenario is not None:
            if self.model is not None or self.mode is not None:
                raise ConfigError("--scenario cannot be combined with --model or --mode")
            return Scenario.from_abbreviation(self.scenario, **overrides)
        if self.model is None or self.mode is None:
            raise ConfigError("give either --scenario or both --model and --mode")

        desk = self.model == "desk" or self.model.endswith(DESK_SUFFIX)
        base = self.model.removesuffix(DESK_SUFFIX)
        if base != "desk" and base not in MODEL_CATALOG:
            raise ConfigError(f"Unknown model {self.model!r}; expected 'desk' or a catalog key with a -desk suffix")
        encoder_key = base if base in MODEL_CATALOG else "custom"
        if encoder_key == "custom":
            name = f"custom-{self.mode}"
        else:
            name = abbreviation_for(encoder_key, self.mode) + (DESK_SUFFIX if desk else "")
        if overrides["batch_size"] is None:
            overrides["batch_size"] = default_batch_size(encoder_key, self.mode)
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return Scenario(name=name, encoder_key=encoder_key, mode=self.mode, desk=desk, **overrides)


class RunRecord(BaseModel):
    """Everything `eval` needs to rebuild a trained pipeline."""

    config: RunConfig
    scenario: Scenario
    label_names: list[str]
    template: str | None = None
    label_words: dict[str, list[str]] | None = None


def load_config_file(path: Path) -> dict[str, Any]:
    """Read run options from a TOML file; keys use underscores (`batch_size`)."""
    with path.open("rb") as handle:
        data = tomllib.load(handle)
    return {key.replace("-", "_"): value for key, value in data.items()}


def is_synthetic(spec: str) -> bool:
    return spec.startswith(SYNTHETIC_PREFIX)


def load_corpus(
    spec: str, *, delimiter: str = "\t", seed: int = 0, label_map: Path | None = None
) -> CorpusSplits:
    """Resolve a corpus spec.

    ``synthetic:CxN`` generates N training titles per class and
    `max(1, N // 5)` validation and test titles per class; ``synthetic:CxNxM``
    sets that number to M. ``a,b,c`` names pre-split train, validation and test files.
    Anything else is one labelled file split 8:1:1 with `seed`. A `label_map`
    file fixes the label order of corpus files.
    """
    if is_synthetic(spec):
        if label_map is not None:
            raise ConfigError("a label map applies to corpus files, not synthetic corpora")
        try:
            sizes = [int(part) for part in spec.removeprefix(SYNTHETIC_PREFIX).lower().split("x")]
        except ValueError:
            sizes = []
        if len(sizes) not in (2, 3):
            raise ConfigError(f"expected synthetic:CxN or synthetic:CxNxM, got {spec}")
        n_classes, n_train = sizes[0], sizes[1]
        n_eval = sizes[2] if len(sizes) == 3 else max(1, n_train // 5)
        train, names = synthesize_corpus(n_classes, n_train, seed=[seed, 0])
        validation, _ = synthesize_corpus(n_classes, n_eval, seed=[seed, 1])
        test, _ = synthesize_corpus(n_classes, n_eval, seed=[seed, 2])
        return CorpusSplits(train=train, validation=validation, test=test, label_names=names)

    label_names = load_label_map(label_map) if label_map is not None else None
    parts = [part.strip() for part in spec.split(",")]
    if len(parts) == 3:
        return load_presplit(*parts, delimiter=delimiter, label_names=label_names)
    if len(parts) != 1:
        raise ConfigError(f"corpus must be one file or three comma-separated files, got {spec}")
    examples, names = load_tncc(parts[0], delimiter=delimiter, label_names=label_names)
    return split(examples, names, seed=seed)


def resolve_prompt(
    config: RunConfig, scenario: Scenario, label_names: list[str]
) -> tuple[Template | None, dict[str, list[str]] | None]:
    """Template and label words for prompt modes; synthetic corpora get built-in defaults."""
    if not scenario.uses_prompt:
        return None, None
    prompts = PromptManager()
    synthetic = is_synthetic(config.corpus)
    template: Template | None = None
    if config.template is not None:
        template = prompts.load_template(config.template)
    elif synthetic:
        template = prompts.get_template(SYNTHETIC_TEMPLATE)

    label_words: dict[str, list[str]] | None = None
    if config.verbalizer is not None:
        label_words = prompts.load_label_words(config.verbalizer)
    elif synthetic:
        label_words = {name: TIBETAN_LABEL_WORDS.get(name, [name]) for name in label_names}

    if template is None or label_words is None:
        raise ConfigError(f"{scenario.mode} mode on a file corpus needs both --template and --verbalizer")
    return template, label_words


def check_run(config: RunConfig) -> Scenario:
    """Resolve scenario, corpus and prompt without training, so bad options fail before any worker starts."""
    scenario = config.to_scenario()
    corpus = load_corpus(config.corpus, delimiter=config.delimiter, seed=config.seed, label_map=config.label_map)
    template, label_words = resolve_prompt(config, scenario, corpus.label_names)
    Trainer(scenario, corpus, template=template, label_words=label_words)
    return scenario


def run_single(config: RunConfig, out_dir: Path) -> TrainReport:
    """Train once and write report, vocabulary, run record and checkpoint under `out_dir`.

    Adapter runs on a warmed-up base also write the base weights to `BASE_FILE`.
    """
    scenario = config.to_scenario()
    corpus = load_corpus(config.corpus, delimiter=config.delimiter, seed=config.seed, label_map=config.label_map)
    template, label_words = resolve_prompt(config, scenario, corpus.label_names)

    trainer = Trainer(scenario, corpus, template=template, label_words=label_words)
    report = trainer.run()
    assert trainer.model is not None and trainer.tokenizer is not None

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_JSON).write_text(report.model_dump_json(indent=2), encoding="utf-8")
    (out_dir / REPORT_TEXT).write_text(report.render_text(), encoding="utf-8")
    trainer.tokenizer.vocab.save(out_dir / VOCAB_FILE)
    write_label_map(out_dir / LABEL_MAP_FILE, corpus.label_names)
    record = RunRecord(
        config=config,
        scenario=scenario,
        label_names=corpus.label_names,
        template=template.text if template else None,
        label_words=label_words,
    )
    (out_dir / RUN_RECORD).write_text(record.model_dump_json(indent=2), encoding="utf-8")
    save_checkpoint(
        trainer.model,
        out_dir / CHECKPOINT_FILE,
        adapters_only=scenario.uses_adapters,
        base_vocab_size=trainer.base_vocab_size,
    )
    if scenario.uses_adapters and trainer.model.pretrained:
        save_checkpoint(trainer.model, out_dir / BASE_FILE, base_only=True, base_vocab_size=trainer.base_vocab_size)
    logger.info(f"Run artifacts written to {out_dir}")
    return report


def run_single_json(config_json: str, out_dir: str) -> str:
    """Process-pool entry point: JSON config in, JSON report out."""
    from peftt.settings import Settings
    from peftt.utilities.logging import configure_logging

    configure_logging(Settings().log_level)
    report = run_single(RunConfig.model_validate_json(config_json), Path(out_dir))
    return report.model_dump_json()


def load_pipeline(run_dir: Path, checkpoint: Path | None = None) -> tuple[ClassificationPipeline, CorpusSplits]:
    """Rebuild the trained pipeline and its (preprocessed) corpus from a run directory."""
    record = RunRecord.model_validate_json((run_dir / RUN_RECORD).read_text(encoding="utf-8"))
    config = record.config
    corpus = load_corpus(config.corpus, delimiter=config.delimiter, seed=config.seed, label_map=config.label_map)
    corpus = corpus.preprocessed()
    if corpus.label_names != record.label_names:
        raise ConfigError(f"corpus labels changed since training: {corpus.label_names} != {record.label_names}")

    tokenizer = Tokenizer(Vocabulary.load(run_dir / VOCAB_FILE))
    base = run_dir / BASE_FILE
    model = load_checkpoint(checkpoint or run_dir / CHECKPOINT_FILE, base=base if base.exists() else None)
    template: Template | None = None
    verbalizer: Verbalizer | None = None
    if record.scenario.uses_prompt:
        if record.template is None or record.label_words is None:
            raise ConfigError(f"{run_dir / RUN_RECORD} lacks the template or label words of a prompt run")
        template = Template(text=record.template)
        verbalizer = Verbalizer.from_words(record.label_names, record.label_words, tokenizer)
    pipeline = ClassificationPipeline(
        model, tokenizer, record.label_names, record.scenario.max_len, template=template, verbalizer=verbalizer
    )
    return pipeline, corpus


def evaluate_run(run_dir: Path, split_name: SplitName = "test", checkpoint: Path | None = None) -> tuple[float, float]:
    """Accuracy and macro-F1 of a saved run on one split."""
    pipeline, corpus = load_pipeline(run_dir, checkpoint)
    examples = {"train": corpus.train, "validation": corpus.validation, "test": corpus.test}[split_name]
    return evaluate(pipeline, examples)
