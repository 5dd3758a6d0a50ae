"""Syllable tokenization for Tibetan text."""

from __future__ import annotations

import re
import unicodedata
from collections.abc import Sequence

from peftt.text.vocab import Vocabulary

TSEK = "་"
_SYLLABLE = re.compile(f"[^{TSEK}]*{TSEK}|[^{TSEK}]+")


def preprocess_symbols(text: str) -> str:
    """NFC-normalize, drop control characters and collapse whitespace runs."""
    text = unicodedata.normalize("NFC", text)
    kept = (
        " " if ch.isspace() else ch
        for ch in text
        if ch.isspace() or unicodedata.category(ch) != "Cc"
    )
    return " ".join("".join(kept).split())


def tokenize(text: str) -> list[str]:
    """Split on whitespace, then after each tsek.

    The tsek stays attached to the syllable it closes; chunks without a tsek
    (other scripts) are kept whole.
    """
    return [piece for chunk in text.split() for piece in _SYLLABLE.findall(chunk)]


class Tokenizer:
    """Maps text to ids over a `Vocabulary`.

    A whitespace chunk already present in the vocabulary is emitted as one
    token; this is how multi-syllable tokens added for verbalizer words are
    matched. Other chunks fall back to syllable splitting.
    """

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab

    def tokenize(self, text: str) -> list[str]:
        pieces: list[str] = []
        for chunk in text.split():
            if chunk in self.vocab:
                pieces.append(chunk)
            else:
                pieces.extend(_SYLLABLE.findall(chunk))
        return pieces

    def encode(self, text: str) -> list[int]:
        return [self.vocab.token_to_id(token) for token in self.tokenize(text)]

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab.id_to_token(int(i)) for i in ids)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)
