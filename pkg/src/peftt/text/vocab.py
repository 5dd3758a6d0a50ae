"""Token vocabulary with the five reserved special tokens."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import TYPE_CHECKING

from peftt.exceptions import VocabularyError
from peftt.utilities.logging import get_logger

if TYPE_CHECKING:
    from peftt.model.encoder import EncoderModel

logger = get_logger(__name__)

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
MASK_TOKEN = "[MASK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, MASK_TOKEN, CLS_TOKEN, SEP_TOKEN)

PAD_ID, UNK_ID, MASK_ID, CLS_ID, SEP_ID = range(len(SPECIAL_TOKENS))
N_SPECIAL_TOKENS = len(SPECIAL_TOKENS)


class Vocabulary:
    """Bijection between token strings and ids 0..n-1.

    Ids 0-4 are always the special tokens. Ids are never reassigned; tokens
    are only ever appended.
    """

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens: list[str] = []
        self._ids: dict[str, int] = {}
        for token in SPECIAL_TOKENS:
            self._append(token)
        for token in tokens:
            if token in self._ids:
                raise VocabularyError(f"Duplicate token in vocabulary: {token!r}")
            self._append(token)

    @classmethod
    def from_texts(cls, texts: Iterable[str], *, min_count: int = 1) -> Vocabulary:
        """Rank tokens by frequency, ties broken by first appearance."""
        from peftt.text.tokenizer import tokenize

        counts: Counter[str] = Counter()
        for text in texts:
            counts.update(token for token in tokenize(text) if token not in SPECIAL_TOKENS)
        ranked = sorted(counts, key=lambda token: -counts[token])
        return cls(token for token in ranked if counts[token] >= min_count)

    @classmethod
    def load(cls, path: Path | str) -> Vocabulary:
        """Read a vocabulary file: one token per line, specials first."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:N_SPECIAL_TOKENS]) != SPECIAL_TOKENS:
            raise VocabularyError(f"{path} does not start with the special tokens {', '.join(SPECIAL_TOKENS)}")
        return cls(lines[N_SPECIAL_TOKENS:])

    def save(self, path: Path | str) -> None:
        Path(path).write_text("".join(f"{token}\n" for token in self._tokens), encoding="utf-8")

    def _append(self, token: str) -> int:
        index = len(self._tokens)
        self._tokens.append(token)
        self._ids[token] = index
        return index

    def add_tokens(self, tokens: Iterable[str]) -> list[int]:
        """Append tokens, returning their consecutive new ids."""
        new = list(tokens)
        seen: set[str] = set()
        for token in new:
            if not token or any(ch.isspace() for ch in token):
                raise VocabularyError(f"Tokens must be non-empty and free of whitespace: {token!r}")
            if token in self._ids or token in seen:
                raise VocabularyError(f"Token already in vocabulary: {token!r}")
            seen.add(token)
        ids = [self._append(token) for token in new]
        if ids:
            logger.debug("Added tokens to vocabulary", extra={"tokens": new, "first_id": ids[0]})
        return ids

    def token_to_id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def id_to_token(self, index: int) -> str:
        if not 0 <= index < len(self._tokens):
            raise VocabularyError(f"Token id {index} out of range for a vocabulary of {len(self._tokens)}")
        return self._tokens[index]

    @staticmethod
    def is_special(index: int) -> bool:
        return 0 <= index < N_SPECIAL_TOKENS

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._ids

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tokens)


def add_tokens(vocab: Vocabulary, tokens: Iterable[str]) -> list[int]:
    return vocab.add_tokens(tokens)


def resize_embeddings(model: EncoderModel, new_vocab_size: int) -> EncoderModel:
    """Grow the model's token table (and untied output rows) to `new_vocab_size`."""
    model.resize_token_embeddings(new_vocab_size)
    return model
