"""The fine-tuning loop shared by all four modes."""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from io import StringIO
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field
from rich.console import Console
from rich.table import Table

from peftt.data.corpus import Batch, CorpusSplits, Example, make_batches
from peftt.exceptions import ConfigError
from peftt.metrics import accuracy, macro_f1
from peftt.model.adapters import inject_adapters, trainable_parameters
from peftt.model.config import EncoderConfig, desk_config
from peftt.model.encoder import ClassifierHead, EncoderModel, MlmHead
from peftt.prompts.base import Template, Verbalizer, classify_batch, project_verbalizer
from peftt.prompts.manager import PromptManager
from peftt.tensor import Tensor, backward, cross_entropy, current_tape, no_grad, take_positions
from peftt.text.tokenizer import Tokenizer
from peftt.text.vocab import CLS_ID, Vocabulary
from peftt.training.optim import AdamState, adam_step
from peftt.training.pretrain import pretrain_mlm
from peftt.training.scenarios import Mode, Scenario
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

EVAL_BATCH_SIZE = 64


class EpochRecord(BaseModel):
    epoch: int = Field(ge=1)
    loss: float
    val_acc: float = Field(ge=0.0, le=1.0)
    val_macro_f1: float = Field(ge=0.0, le=1.0)
    test_acc: float = Field(ge=0.0, le=1.0)
    test_macro_f1: float = Field(ge=0.0, le=1.0)


class TrainReport(BaseModel):
    """Outcome of a training run; metrics are those of the best validation epoch."""

    scenario: str
    encoder_key: str
    mode: Mode
    seed: int
    learning_rate: float
    epochs: list[EpochRecord]
    best_epoch: int = Field(ge=1)
    val_acc: float
    val_macro_f1: float
    test_acc: float
    test_macro_f1: float
    trainable_parameters: int
    total_parameters: int
    trainable_ratio: float
    added_tokens: list[str] = Field(default_factory=list)
    label_names: list[str] = Field(default_factory=list)

    @property
    def ratio_text(self) -> str:
        from peftt.accounting import format_ratio

        return format_ratio(self.trainable_ratio, self.mode)

    def to_table(self) -> Table:
        table = Table(title=f"{self.scenario} (best epoch {self.best_epoch} of {len(self.epochs)})")
        for column in (
            "Situation",
            "Training Parameters",
            "Vev_acc",
            "Vev_macro_f1",
            "Test_acc",
            "Test_macro_f1",
            "Training Parameters Ratio",
        ):
            table.add_column(column, no_wrap=True)
        table.add_row(
            self.scenario,
            str(self.trainable_parameters),
            f"{self.val_acc:.5f}",
            f"{self.val_macro_f1:.5f}",
            f"{self.test_acc:.5f}",
            f"{self.test_macro_f1:.5f}",
            self.ratio_text,
        )
        return table

    def render_text(self) -> str:
        buffer = StringIO()
        Console(file=buffer, width=160, color_system=None).print(self.to_table())
        return buffer.getvalue()


class ClassificationPipeline:
    """A model with everything needed to turn titles into class scores."""

    def __init__(
        self,
        model: EncoderModel,
        tokenizer: Tokenizer,
        label_names: Sequence[str],
        max_len: int,
        template: Template | None = None,
        verbalizer: Verbalizer | None = None,
    ):
        if (template is None) != (verbalizer is None):
            raise ConfigError("a template and a verbalizer must be given together")
        self.model = model
        self.tokenizer = tokenizer
        self.label_names = list(label_names)
        self.max_len = max_len
        self.template = template
        self.verbalizer = verbalizer

    @property
    def uses_prompt(self) -> bool:
        return self.verbalizer is not None

    def batches(
        self, examples: Sequence[Example], batch_size: int, shuffle_seed: int | None = None, epoch: int = 0
    ) -> Iterator[Batch]:
        return make_batches(
            examples,
            self.template,
            self.tokenizer,
            batch_size,
            shuffle_seed,
            epoch=epoch,
            max_len=self.max_len,
            verbalizer=self.verbalizer,
        )

    def class_scores(self, batch: Batch) -> Tensor:
        """[B, C] scores: verbalizer-projected MLM logits at the mask, or classifier logits at [CLS]."""
        hidden = self.model.encode(batch.token_ids, batch.pad_mask)
        rows = take_positions(hidden, batch.positions)
        if self.verbalizer is not None:
            return project_verbalizer(self.model.mlm_logits(rows), self.verbalizer)
        return self.model.classifier_logits(rows)

    def predict(self, examples: Sequence[Example], batch_size: int = EVAL_BATCH_SIZE) -> NDArray[np.int64]:
        with no_grad():
            predictions = [classify_batch(self.class_scores(batch)) for batch in self.batches(examples, batch_size)]
        return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def evaluate(
    pipeline: ClassificationPipeline, examples: Sequence[Example], batch_size: int = EVAL_BATCH_SIZE
) -> tuple[float, float]:
    """Accuracy and macro-F1 over all declared classes, without recording gradients."""
    predictions = pipeline.predict(examples, batch_size)
    golds = [example.label for example in examples]
    return accuracy(predictions, golds), macro_f1(predictions, golds, len(pipeline.label_names))


class Trainer:
    """Runs one scenario on one corpus.

    `setup()` performs, in order: symbol preprocessing, tokenizer and model
    construction with an MLM warm-up of the base, label-word token
    addition, embedding resize, template and verbalizer binding, and
    adapter injection. `run()` then trains for the
    configured epochs, keeps the trainable tensors of the best validation
    epoch and reports.
    """

    def __init__(
        self,
        scenario: Scenario,
        corpus: CorpusSplits,
        *,
        template: Template | None = None,
        label_words: Mapping[str, Sequence[str]] | None = None,
    ):
        if not scenario.desk:
            raise ConfigError(
                f"{scenario.name}: published-size encoders are only used for parameter accounting; "
                "train the -desk variant instead"
            )
        if scenario.uses_prompt and (template is None or label_words is None):
            raise ConfigError(f"{scenario.mode} mode needs a template and label words")
        if not (corpus.train and corpus.validation and corpus.test):
            raise ConfigError("train, validation and test splits must all be non-empty")
        self.scenario = scenario
        self.raw_corpus = corpus
        self.template = template if scenario.uses_prompt else None
        self.label_words = label_words
        self.prompts = PromptManager()

        self.corpus: CorpusSplits | None = None
        self.tokenizer: Tokenizer | None = None
        self.model: EncoderModel | None = None
        self.verbalizer: Verbalizer | None = None
        self.added_token_ids: list[int] = []
        self.base_vocab_size = 0
        self.pipeline: ClassificationPipeline | None = None

    def preprocess(self) -> CorpusSplits:
        self.corpus = self.raw_corpus.preprocessed()
        if not (self.corpus.train and self.corpus.validation and self.corpus.test):
            raise ConfigError("a split is empty after preprocessing")
        return self.corpus

    def build_model(self) -> EncoderModel:
        assert self.corpus is not None
        texts = [example.text for example in self.corpus.train]
        if self.template is not None:
            texts.append(self.template.literal_text)
        self.tokenizer = Tokenizer(Vocabulary.from_texts(texts))

        vocab_size = len(self.tokenizer.vocab)
        self.base_vocab_size = vocab_size
        if self.scenario.encoder is not None:
            if self.scenario.encoder.max_len < self.scenario.max_len:
                raise ConfigError(
                    f"encoder max_len {self.scenario.encoder.max_len} is below the input length {self.scenario.max_len}"
                )
            config = self.scenario.encoder.model_copy(update={"vocab_size": vocab_size})
        else:
            config = desk_config(vocab_size, self.scenario.max_len)

        head = MlmHead() if self.scenario.uses_prompt else ClassifierHead(n_classes=self.corpus.n_classes)
        if self.scenario.warmup_epochs:
            self.model = self.warm_up(config, head)
        else:
            self.model = EncoderModel(config, head, seed=self.scenario.seed)
        logger.info(f"Built encoder with {self.model.num_parameters()} parameters and a {vocab_size}-token vocabulary")
        return self.model

    def warm_up(self, config: EncoderConfig, head: MlmHead | ClassifierHead) -> EncoderModel:
        """Pretrain the base on the training titles, then attach `head`.

        Titles are prefixed the way fine-tuning will see them: [CLS] for
        classifier modes, the template's fixed words for prompt modes.
        """
        assert self.corpus is not None and self.tokenizer is not None
        prefix = [CLS_ID] if self.template is None else self.tokenizer.encode(self.template.literal_text)
        sequences = [prefix + self.tokenizer.encode(example.text) for example in self.corpus.train]
        mlm = EncoderModel(config, MlmHead(), seed=self.scenario.seed)
        pretrain_mlm(
            mlm,
            sequences,
            len(prefix),
            epochs=self.scenario.warmup_epochs,
            lr=self.scenario.warmup_lr,
            batch_size=self.scenario.batch_size,
            seed=self.scenario.seed,
        )
        if isinstance(head, MlmHead):
            return mlm
        model = EncoderModel(config, head, seed=self.scenario.seed)
        encoder = {name: data for name, data in mlm.state_dict().items() if not name.startswith("mlm.")}
        model.load_state_dict(encoder, strict=False)
        model.pretrained = True
        return model

    def add_label_tokens(self) -> list[int]:
        assert self.corpus is not None and self.tokenizer is not None
        if not self.scenario.uses_prompt:
            return []
        assert self.label_words is not None
        self.verbalizer, self.added_token_ids = self.prompts.prepare_verbalizer(
            self.corpus.label_names, self.label_words, self.tokenizer
        )
        return self.added_token_ids

    def resize_embeddings(self) -> None:
        assert self.model is not None and self.tokenizer is not None
        self.model.resize_token_embeddings(len(self.tokenizer.vocab))

    def bind_prompt(self) -> ClassificationPipeline:
        assert self.model is not None and self.tokenizer is not None and self.corpus is not None
        if self.verbalizer is not None and self.verbalizer.n_classes != self.corpus.n_classes:
            raise ConfigError(
                f"verbalizer covers {self.verbalizer.n_classes} classes but the corpus has {self.corpus.n_classes}"
            )
        self.pipeline = ClassificationPipeline(
            self.model,
            self.tokenizer,
            self.corpus.label_names,
            self.scenario.max_len,
            template=self.template,
            verbalizer=self.verbalizer,
        )
        return self.pipeline

    def inject(self) -> None:
        assert self.model is not None
        if self.scenario.uses_adapters:
            inject_adapters(self.model, self.scenario.rank, self.scenario.adapter_mode)

    def setup(self) -> ClassificationPipeline:
        if self.pipeline is not None:
            return self.pipeline
        self.preprocess()
        self.build_model()
        self.add_label_tokens()
        self.resize_embeddings()
        pipeline = self.bind_prompt()
        self.inject()
        return pipeline

    def train_epoch(self, epoch: int, params: Sequence[Tensor], state: AdamState) -> float:
        """One pass over the training split; returns the mean batch loss."""
        assert self.pipeline is not None and self.corpus is not None
        losses: list[float] = []
        batches = self.pipeline.batches(
            self.corpus.train, self.scenario.batch_size, shuffle_seed=self.scenario.seed, epoch=epoch
        )
        for batch in batches:
            current_tape().clear()
            loss = cross_entropy(self.pipeline.class_scores(batch), batch.labels)
            backward(loss)
            adam_step(params, [p.grad for p in params], state, self.scenario.learning_rate)
            for param in params:
                param.grad = None
            losses.append(loss.item())
        return float(np.mean(losses))

    def run(self) -> TrainReport:
        pipeline = self.setup()
        assert self.model is not None and self.corpus is not None and self.tokenizer is not None
        params, n_trainable = trainable_parameters(self.model)
        total = self.model.num_parameters(include_adapters=False)
        state = AdamState.for_parameters(params)

        records: list[EpochRecord] = []
        best: EpochRecord | None = None
        best_state: list[NDArray[Any]] = []
        for epoch in range(1, self.scenario.epochs + 1):
            loss = self.train_epoch(epoch, params, state)
            val_acc, val_f1 = evaluate(pipeline, self.corpus.validation)
            test_acc, test_f1 = evaluate(pipeline, self.corpus.test)
            record = EpochRecord(
                epoch=epoch,
                loss=loss,
                val_acc=val_acc,
                val_macro_f1=val_f1,
                test_acc=test_acc,
                test_macro_f1=test_f1,
            )
            records.append(record)
            logger.info(
                f"{self.scenario.name} epoch {epoch}: loss={loss:.4f} val_acc={val_acc:.5f} val_f1={val_f1:.5f}"
            )
            if best is None or val_f1 > best.val_macro_f1:
                best = record
                best_state = [param.data.copy() for param in params]

        assert best is not None
        for param, data in zip(params, best_state):
            param.data[...] = data

        added = [self.tokenizer.vocab.id_to_token(i) for i in self.added_token_ids]
        return TrainReport(
            scenario=self.scenario.name,
            encoder_key=self.scenario.encoder_key,
            mode=self.scenario.mode,
            seed=self.scenario.seed,
            learning_rate=self.scenario.learning_rate,
            epochs=records,
            best_epoch=best.epoch,
            val_acc=best.val_acc,
            val_macro_f1=best.val_macro_f1,
            test_acc=best.test_acc,
            test_macro_f1=best.test_macro_f1,
            trainable_parameters=n_trainable,
            total_parameters=total,
            trainable_ratio=n_trainable / total,
            added_tokens=added,
            label_names=self.corpus.label_names,
        )


def run_training(
    scenario: Scenario,
    corpus: CorpusSplits,
    *,
    template: Template | None = None,
    label_words: Mapping[str, Sequence[str]] | None = None,
) -> TrainReport:
    return Trainer(scenario, corpus, template=template, label_words=label_words).run()
