"""Labelled title corpora: loading, splitting and batching."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from peftt.exceptions import CorpusFormatError, ShapeError
from peftt.prompts.base import Template, Verbalizer, wrap
from peftt.text.tokenizer import Tokenizer, preprocess_symbols
from peftt.text.vocab import CLS_ID, PAD_ID
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

MIN_SPLIT_EXAMPLES = 10


class Example(BaseModel):
    """One labelled title."""

    model_config = ConfigDict(frozen=True)

    text: str = Field(min_length=1)
    label: int = Field(ge=0)


class CorpusSplits(BaseModel):
    """Train/validation/test partitions sharing one label index."""

    train: list[Example]
    validation: list[Example]
    test: list[Example]
    label_names: list[str]

    @model_validator(mode="after")
    def _check_labels(self) -> CorpusSplits:
        n_classes = len(self.label_names)
        for example in (*self.train, *self.validation, *self.test):
            if example.label >= n_classes:
                raise ValueError(f"label {example.label} outside {n_classes} declared classes")
        return self

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def preprocessed(self) -> CorpusSplits:
        """Symbol preprocessing applied to every text; examples left empty are dropped."""

        def clean(examples: list[Example]) -> list[Example]:
            cleaned = [Example(text=text, label=e.label) for e in examples if (text := preprocess_symbols(e.text))]
            if len(cleaned) < len(examples):
                logger.warning(f"Dropped {len(examples) - len(cleaned)} examples that were empty after preprocessing")
            return cleaned

        return CorpusSplits(
            train=clean(self.train),
            validation=clean(self.validation),
            test=clean(self.test),
            label_names=self.label_names,
        )


def _read_lines(
    path: Path, delimiter: str, labels: dict[str, int], *, fixed_labels: bool
) -> tuple[list[Example], int]:
    examples: list[Example] = []
    empty = 0
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        label, sep, title = line.partition(delimiter)
        label = label.strip()
        if not sep or not label:
            raise CorpusFormatError(f"{path}:{number}: expected 'label{delimiter!r}title'")
        title = title.strip()
        if not title:
            empty += 1
            continue
        if label not in labels:
            if fixed_labels:
                raise CorpusFormatError(f"{path}:{number}: unknown label {label!r}")
            labels[label] = len(labels)
        examples.append(Example(text=title, label=labels[label]))
    return examples, empty


def load_tncc(
    path: Path | str, *, delimiter: str = "\t", label_names: Sequence[str] | None = None
) -> tuple[list[Example], list[str]]:
    """Read `label<delimiter>title` lines.

    Labels are indexed by first appearance unless `label_names` fixes the
    order. Lines with an empty title are skipped with a warning.
    """
    path = Path(path)
    labels = {name: i for i, name in enumerate(label_names or ())}
    examples, empty = _read_lines(path, delimiter, labels, fixed_labels=label_names is not None)
    if empty:
        logger.warning(f"Skipped {empty} lines with an empty title in {path}")
    return examples, list(labels)


def load_presplit(
    train: Path | str,
    validation: Path | str,
    test: Path | str,
    *,
    delimiter: str = "\t",
    label_names: Sequence[str] | None = None,
) -> CorpusSplits:
    """Three files, labels indexed by first appearance across train, validation, test.

    `label_names` fixes the order instead, as in `load_tncc`.
    """
    labels = {name: i for i, name in enumerate(label_names or ())}
    parts: list[list[Example]] = []
    for path in (train, validation, test):
        examples, empty = _read_lines(Path(path), delimiter, labels, fixed_labels=label_names is not None)
        if empty:
            logger.warning(f"Skipped {empty} lines with an empty title in {path}")
        parts.append(examples)
    return CorpusSplits(train=parts[0], validation=parts[1], test=parts[2], label_names=list(labels))


def load_label_map(path: Path | str) -> list[str]:
    """Label names, one per line; the order of first appearance is the label index."""
    path = Path(path)
    names: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        name = line.strip()
        if name and name not in names:
            names.append(name)
    if len(names) < 2:
        raise CorpusFormatError(f"{path}: a label map needs at least two labels, got {len(names)}")
    return names


def write_label_map(path: Path | str, label_names: Sequence[str]) -> None:
    Path(path).write_text("".join(f"{name}\n" for name in label_names), encoding="utf-8")


def write_tncc(
    path: Path | str, examples: Sequence[Example], label_names: Sequence[str], *, delimiter: str = "\t"
) -> None:
    lines = [f"{label_names[e.label]}{delimiter}{e.text}\n" for e in examples]
    Path(path).write_text("".join(lines), encoding="utf-8")


def split(
    examples: Sequence[Example],
    label_names: Sequence[str],
    ratios: tuple[int, int, int] = (8, 1, 1),
    *,
    seed: int = 0,
) -> CorpusSplits:
    """Shuffle with `seed` and cut into train/validation/test.

    Train and validation sizes are floor(n * ratio / total); test takes the
    remainder, so 15 examples split 8:1:1 give 12, 1 and 2.
    """
    n = len(examples)
    if n < MIN_SPLIT_EXAMPLES:
        raise CorpusFormatError(f"need at least {MIN_SPLIT_EXAMPLES} examples to split, got {n}")
    if any(r <= 0 for r in ratios):
        raise CorpusFormatError(f"split ratios must be positive, got {ratios}")
    total = sum(ratios)
    n_train = n * ratios[0] // total
    n_val = n * ratios[1] // total
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [examples[i] for i in order]
    return CorpusSplits(
        train=shuffled[:n_train],
        validation=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
        label_names=list(label_names),
    )


@dataclass(frozen=True)
class Batch:
    """Model-ready arrays for one mini-batch.

    `positions` is the mask position for templated inputs and 0 ([CLS]) otherwise.
    """

    token_ids: NDArray[np.int64]
    pad_mask: NDArray[np.bool_]
    positions: NDArray[np.int64]
    labels: NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def encode_classifier_input(text: str, tokenizer: Tokenizer, max_len: int) -> tuple[list[int], list[bool]]:
    """[CLS] followed by the text tokens, truncated and padded to `max_len`."""
    ids = [CLS_ID, *tokenizer.encode(text)][:max_len]
    padding = max_len - len(ids)
    return ids + [PAD_ID] * padding, [False] * len(ids) + [True] * padding


def make_batches(
    examples: Sequence[Example],
    template: Template | None,
    tokenizer: Tokenizer,
    batch_size: int,
    shuffle_seed: int | None = None,
    *,
    epoch: int = 0,
    max_len: int = 108,
    verbalizer: Verbalizer | None = None,
) -> Iterator[Batch]:
    """Yield padded batches in order, or reshuffled per epoch when `shuffle_seed` is given."""
    if batch_size < 1:
        raise ShapeError(f"batch_size must be positive, got {batch_size}")
    if verbalizer is not None and any(e.label >= verbalizer.n_classes for e in examples):
        raise CorpusFormatError(f"example label outside the verbalizer's {verbalizer.n_classes} classes")

    order = np.arange(len(examples))
    if shuffle_seed is not None:
        order = np.random.default_rng([shuffle_seed, epoch]).permutation(len(examples))

    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start : start + batch_size]]
        ids: list[list[int]] = []
        pads: list[list[bool]] = []
        positions: list[int] = []
        for example in chunk:
            if template is None:
                token_ids, pad_mask = encode_classifier_input(example.text, tokenizer, max_len)
                position = 0
            else:
                wrapped = wrap(template, example.text, tokenizer, max_len)
                token_ids, pad_mask, position = wrapped.token_ids, wrapped.pad_mask, wrapped.mask_position
            ids.append(token_ids)
            pads.append(pad_mask)
            positions.append(position)
        yield Batch(
            token_ids=np.asarray(ids, dtype=np.int64),
            pad_mask=np.asarray(pads, dtype=bool),
            positions=np.asarray(positions, dtype=np.int64),
            labels=np.asarray([e.label for e in chunk], dtype=np.int64),
        )
