import pytest
from pydantic import ValidationError

from peftt.data.synthetic import (
    TIBETAN_LABEL_WORDS,
    TNCC_LABELS,
    SyntheticSpec,
    filler_tokens,
    oracle_predict,
    signal_tokens,
    syllable_inventory,
    synthesize_corpus,
)
from peftt.exceptions import ConfigError
from peftt.text.tokenizer import tokenize


class TestSynthesizeCorpus:
    def test_twelve_by_fifty(self):
        """Every title carries signal syllables of its own class."""
        examples, names = synthesize_corpus(12, 50, seed=0)
        assert len(examples) == 600
        assert names == list(TNCC_LABELS)
        signals = signal_tokens(12)
        for example in examples:
            assert set(tokenize(example.text)) & set(signals[example.label])
        assert sorted({e.label for e in examples}) == list(range(12))

    def test_oracle_is_perfect(self):
        """Counting planted syllables classifies every title."""
        examples, _ = synthesize_corpus(12, 30, seed=5)
        assert all(oracle_predict(e.text, 12) == e.label for e in examples)

    def test_seeded(self):
        """The corpus is a function of the seed."""
        assert synthesize_corpus(3, 10, seed=1) == synthesize_corpus(3, 10, seed=1)
        assert synthesize_corpus(3, 10, seed=[1, 0]) != synthesize_corpus(3, 10, seed=[1, 1])

    def test_class_weights(self):
        """Weights scale the per-class counts."""
        spec = SyntheticSpec(class_weights=[1.0, 0.5, 0.1])
        examples, _ = synthesize_corpus(3, 20, spec, seed=0)
        counts = [sum(e.label == c for e in examples) for c in range(3)]
        assert counts == [20, 10, 2]

    def test_signals_and_filler_are_disjoint(self):
        """No syllable is both a signal and filler."""
        signals = {token for group in signal_tokens(12) for token in group}
        assert len(signals) == 48
        assert not signals & set(filler_tokens(12))
        assert len(set(syllable_inventory())) == len(syllable_inventory()) == 150

    def test_label_words_are_outside_the_inventory(self):
        """Label words are never spelled by the generated syllables."""
        inventory = set(syllable_inventory())
        for words in TIBETAN_LABEL_WORDS.values():
            for word in words:
                assert any(piece not in inventory for piece in tokenize(word))

    def test_invalid_requests(self):
        """Too few classes, too many syllables or bad specs are rejected."""
        with pytest.raises(ConfigError):
            synthesize_corpus(1, 10)
        with pytest.raises(ConfigError):
            synthesize_corpus(40, 10)
        with pytest.raises(ConfigError):
            synthesize_corpus(3, 0)
        with pytest.raises(ConfigError):
            synthesize_corpus(3, 10, SyntheticSpec(class_weights=[1.0, 1.0]))
        with pytest.raises(ValidationError):
            SyntheticSpec(signals_per_example=5, signals_per_class=4)
