"""Deterministic synthetic title corpora in Tibetan script.

Each class owns a handful of signal syllables; every title mixes some of
its class's signal syllables with shared filler syllables. A bag-of-words
reader that knows the signal sets classifies every title correctly.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from peftt.data.corpus import Example
from peftt.exceptions import ConfigError
from peftt.text.tokenizer import TSEK

TNCC_LABELS = (
    "Politics",
    "Economics",
    "Education",
    "Tourism",
    "Environment",
    "Language",
    "Literature",
    "Religion",
    "Arts",
    "Medicine",
    "Customs",
    "Instruments",
)

# One Tibetan word per TNCC class.
TIBETAN_LABEL_WORDS: dict[str, list[str]] = {
    "Politics": ["ཆབ་སྲིད"],
    "Economics": ["དཔལ་འབྱོར"],
    "Education": ["སློབ་གསོ"],
    "Tourism": ["ཡུལ་སྐོར"],
    "Environment": ["ཁོར་ཡུག"],
    "Language": ["སྐད་ཡིག"],
    "Literature": ["རྩོམ་རིག"],
    "Religion": ["ཆོས་ལུགས"],
    "Arts": ["སྒྱུ་རྩལ"],
    "Medicine": ["གསོ་རིག"],
    "Customs": ["སྲོལ་རྒྱུན"],
    "Instruments": ["རོལ་ཆ"],
}

_CONSONANTS = "ཀཁགངཅཆཇཉཏཐདནཔཕབམཙཚཛཝཞཟའཡརལཤསཧཨ"
_VOWELS = ("", "ི", "ུ", "ེ", "ོ")


def syllable_inventory() -> list[str]:
    """Single-letter syllables: a base consonant, an optional vowel sign, a tsek."""
    return [f"{consonant}{vowel}{TSEK}" for vowel in _VOWELS for consonant in _CONSONANTS]


class SyntheticSpec(BaseModel):
    """Shape of a synthetic corpus."""

    signals_per_class: int = Field(default=4, ge=1)
    signals_per_example: int = Field(default=3, ge=1)
    n_filler: int = Field(default=48, ge=1)
    filler_min: int = Field(default=2, ge=0)
    filler_max: int = Field(default=4, ge=0)
    class_weights: list[float] | None = Field(
        default=None, description="Relative class sizes; class c gets round(n_per_class * weight_c) examples"
    )

    @model_validator(mode="after")
    def _check(self) -> SyntheticSpec:
        if self.signals_per_example > self.signals_per_class:
            raise ValueError("signals_per_example cannot exceed signals_per_class")
        if self.filler_min > self.filler_max:
            raise ValueError("filler_min cannot exceed filler_max")
        if self.class_weights is not None and any(w <= 0 for w in self.class_weights):
            raise ValueError("class weights must be positive")
        return self


def synthetic_label_names(n_classes: int) -> list[str]:
    if n_classes <= len(TNCC_LABELS):
        return list(TNCC_LABELS[:n_classes])
    return [f"class-{i}" for i in range(n_classes)]


def signal_tokens(n_classes: int, spec: SyntheticSpec | None = None) -> list[list[str]]:
    """The signal syllables of each class; filler syllables follow them in the inventory."""
    spec = spec or SyntheticSpec()
    inventory = syllable_inventory()
    needed = n_classes * spec.signals_per_class + spec.n_filler
    if n_classes < 2:
        raise ConfigError(f"a synthetic corpus needs at least two classes, got {n_classes}")
    if needed > len(inventory):
        raise ConfigError(f"{needed} distinct syllables requested but only {len(inventory)} are available")
    k = spec.signals_per_class
    return [inventory[c * k : (c + 1) * k] for c in range(n_classes)]


def filler_tokens(n_classes: int, spec: SyntheticSpec | None = None) -> list[str]:
    spec = spec or SyntheticSpec()
    start = n_classes * spec.signals_per_class
    return syllable_inventory()[start : start + spec.n_filler]


def synthesize_corpus(
    n_classes: int, n_per_class: int, spec: SyntheticSpec | None = None, *, seed: int | Sequence[int] = 0
) -> tuple[list[Example], list[str]]:
    """Generate labelled titles and their label names, in a seeded random order.

    `seed` may be a sequence of integers to derive independent corpora from one base seed.
    """
    spec = spec or SyntheticSpec()
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be positive, got {n_per_class}")
    weights: Sequence[float] = spec.class_weights or [1.0] * n_classes
    if len(weights) != n_classes:
        raise ConfigError(f"expected {n_classes} class weights, got {len(weights)}")

    signals = signal_tokens(n_classes, spec)
    filler = filler_tokens(n_classes, spec)
    rng = np.random.default_rng(seed)
    examples: list[Example] = []
    for label, weight in enumerate(weights):
        for _ in range(max(1, round(n_per_class * weight))):
            chosen = list(rng.choice(signals[label], size=spec.signals_per_example, replace=False))
            n_fill = int(rng.integers(spec.filler_min, spec.filler_max + 1))
            chosen += list(rng.choice(filler, size=n_fill, replace=True))
            rng.shuffle(chosen)
            examples.append(Example(text="".join(str(s) for s in chosen), label=label))
    order = rng.permutation(len(examples))
    return [examples[i] for i in order], synthetic_label_names(n_classes)


def oracle_predict(text: str, n_classes: int, spec: SyntheticSpec | None = None) -> int:
    """Bag-of-words classifier that counts each class's signal syllables."""
    from peftt.text.tokenizer import tokenize

    tokens = tokenize(text)
    counts = [sum(token in set(group) for token in tokens) for group in signal_tokens(n_classes, spec)]
    return int(np.argmax(counts))
