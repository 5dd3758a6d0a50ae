"""Hard templates and verbalizers."""

from __future__ import annotations

import re
from collections.abc import Mapping, Sequence
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray
from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator

from peftt.exceptions import TemplateError, VerbalizerError
from peftt.tensor import Tensor, matmul, reshape
from peftt.text.tokenizer import Tokenizer, preprocess_symbols
from peftt.text.vocab import MASK_ID, MASK_TOKEN, PAD_ID, UNK_ID

MASK_SLOT = "{mask}"
TEXT_SLOT = "{text}"
_SLOTS = re.compile(r"(\{mask\}|\{text\})")

TemplatePart = tuple[Literal["literal", "mask", "text"], str]


class Template(BaseModel):
    """A hard template with exactly one mask slot and one text slot.

    Literal text may appear before, between and after the slots, e.g.
    ``"News Classification: {mask} {text}"``.
    """

    text: str = Field(description="Template string containing {mask} and {text}")

    @field_validator("text")
    @classmethod
    def _check_slots(cls, value: str) -> str:
        for slot in (MASK_SLOT, TEXT_SLOT):
            count = value.count(slot)
            if count != 1:
                raise ValueError(f"template must contain exactly one {slot}, found {count}")
        return value

    @classmethod
    def from_prefix(cls, prefix: str) -> Template:
        """The `prefix [MASK] text` form."""
        prefix = preprocess_symbols(prefix)
        return cls(text=f"{prefix} {MASK_SLOT} {TEXT_SLOT}" if prefix else f"{MASK_SLOT} {TEXT_SLOT}")

    @property
    def parts(self) -> list[TemplatePart]:
        parts: list[TemplatePart] = []
        for piece in _SLOTS.split(self.text):
            if piece == MASK_SLOT:
                parts.append(("mask", piece))
            elif piece == TEXT_SLOT:
                parts.append(("text", piece))
            elif piece.strip():
                parts.append(("literal", piece))
        return parts

    @property
    def literal_text(self) -> str:
        """The fixed words of the template, for vocabulary building."""
        return " ".join(piece for kind, piece in self.parts if kind == "literal")

    def render(self, text: str) -> str:
        filled = self.text.replace(MASK_SLOT, MASK_TOKEN).replace(TEXT_SLOT, text)
        return " ".join(filled.split())


class WrappedInput(BaseModel):
    """A templated and padded token sequence."""

    token_ids: list[int]
    pad_mask: list[bool] = Field(description="True at padding positions")
    mask_position: int = Field(ge=0)
    label: int | None = None

    @model_validator(mode="after")
    def _check(self) -> WrappedInput:
        if len(self.token_ids) != len(self.pad_mask):
            raise ValueError("token_ids and pad_mask differ in length")
        if self.mask_position >= len(self.token_ids) or self.token_ids[self.mask_position] != MASK_ID:
            raise ValueError("mask_position does not point at the mask token")
        return self


def wrap(template: Template, text: str, tokenizer: Tokenizer, max_len: int, label: int | None = None) -> WrappedInput:
    """Fill the template, truncating only the text slot, then pad to `max_len`.

    Raises TemplateError when the template's own tokens leave no room for
    the mask within `max_len`.
    """
    pieces: list[tuple[str, list[int]]] = []
    for kind, piece in template.parts:
        if kind == "literal":
            pieces.append((kind, tokenizer.encode(piece)))
        elif kind == "mask":
            pieces.append((kind, [MASK_ID]))
        else:
            pieces.append((kind, tokenizer.encode(text)))

    fixed = sum(len(ids) for kind, ids in pieces if kind != "text")
    budget = max_len - fixed
    if budget < 0:
        raise TemplateError(f"template needs {fixed} tokens but max_len is {max_len}; the mask would be truncated")

    token_ids: list[int] = []
    mask_position = 0
    for kind, ids in pieces:
        if kind == "mask":
            mask_position = len(token_ids)
        token_ids.extend(ids[:budget] if kind == "text" else ids)

    padding = max_len - len(token_ids)
    return WrappedInput(
        token_ids=token_ids + [PAD_ID] * padding,
        pad_mask=[False] * len(token_ids) + [True] * padding,
        mask_position=mask_position,
        label=label,
    )


class Verbalizer(BaseModel):
    """Label words for every class and their token ids.

    A class score is the mean, over its words, of the mean logit of each
    word's tokens.
    """

    label_names: list[str]
    label_words: list[list[str]]
    word_ids: list[list[list[int]]]
    _projection_cache: dict[tuple[int, str], NDArray[Any]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check(self) -> Verbalizer:
        if len(self.label_names) < 2:
            raise ValueError("a verbalizer needs at least two classes")
        if not len(self.label_names) == len(self.label_words) == len(self.word_ids):
            raise ValueError("label_names, label_words and word_ids must have one entry per class")
        for name, words, ids in zip(self.label_names, self.label_words, self.word_ids):
            if not words or len(words) != len(ids):
                raise ValueError(f"class {name!r} needs at least one word and ids for every word")
            if any(not word_ids for word_ids in ids):
                raise ValueError(f"class {name!r} has a word that maps to no tokens")
        return self

    @classmethod
    def from_words(
        cls, label_names: Sequence[str], label_words: Mapping[str, Sequence[str]], tokenizer: Tokenizer
    ) -> Verbalizer:
        """Resolve words to ids; every class in `label_names` must have words the vocabulary knows."""
        words_per_class: list[list[str]] = []
        ids_per_class: list[list[list[int]]] = []
        for name in label_names:
            words = [preprocess_symbols(word) for word in label_words.get(name, ())]
            words = [word for word in words if word]
            if not words:
                raise VerbalizerError(f"no label words for class {name!r}")
            encoded = [tokenizer.encode(word) for word in words]
            for word, ids in zip(words, encoded):
                if UNK_ID in ids:
                    raise VerbalizerError(f"label word {word!r} of class {name!r} maps to the unknown token")
            words_per_class.append(words)
            ids_per_class.append(encoded)
        return cls(label_names=list(label_names), label_words=words_per_class, word_ids=ids_per_class)

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @property
    def max_token_id(self) -> int:
        return max(i for words in self.word_ids for ids in words for i in ids)

    def projection(self, vocab_size: int, dtype: DTypeLike = np.float32) -> NDArray[Any]:
        """[V x C] matrix mapping vocabulary logits to class scores."""
        if self.max_token_id >= vocab_size:
            raise VerbalizerError(f"label word id {self.max_token_id} out of range for a vocabulary of {vocab_size}")
        key = (vocab_size, np.dtype(dtype).str)
        cached = self._projection_cache.get(key)
        if cached is not None:
            return cached
        weights = np.zeros((vocab_size, self.n_classes), dtype=np.float64)
        for label, words in enumerate(self.word_ids):
            for ids in words:
                for token_id in ids:
                    weights[token_id, label] += 1.0 / (len(words) * len(ids))
        matrix = weights.astype(dtype)
        self._projection_cache[key] = matrix
        return matrix


def project_verbalizer(vocab_logits: Tensor, verbalizer: Verbalizer) -> Tensor:
    """Class scores [C] (or [N, C]) from vocabulary logits [V] (or [N, V])."""
    single = vocab_logits.ndim == 1
    rows = reshape(vocab_logits, (1, vocab_logits.shape[0])) if single else vocab_logits
    matrix = Tensor(verbalizer.projection(rows.shape[-1], rows.dtype), dtype=rows.dtype)
    scores = matmul(rows, matrix)
    return reshape(scores, (verbalizer.n_classes,)) if single else scores


def classify(scores: Tensor | ArrayLike) -> int:
    """Arg-max class; ties go to the lowest index."""
    data = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    return int(np.argmax(data))


def classify_batch(scores: Tensor | ArrayLike) -> NDArray[np.int64]:
    data = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    return np.argmax(data, axis=-1).astype(np.int64)
