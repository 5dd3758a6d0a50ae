import numpy as np
import pytest

from peftt.data import synthesize_corpus
from peftt.exceptions import ConfigError
from peftt.model import ClassifierHead, EncoderModel, MlmHead, desk_config, inject_adapters
from peftt.text import Tokenizer, Vocabulary
from peftt.text.vocab import CLS_ID, MASK_ID, PAD_ID
from peftt.training.pretrain import masked_batch, pretrain_mlm


def title_sequences(n_classes: int = 4, n_per_class: int = 6) -> tuple[Tokenizer, list[list[int]]]:
    examples, _ = synthesize_corpus(n_classes, n_per_class, seed=[0, 0])
    tokenizer = Tokenizer(Vocabulary.from_texts([example.text for example in examples]))
    return tokenizer, [[CLS_ID] + tokenizer.encode(example.text) for example in examples]


class TestMaskedBatch:
    def test_masks_only_after_the_prefix(self):
        """The fixed prefix is never masked and every row with free tokens gets at least one mask."""
        rows = [[CLS_ID, *range(10, 30)], [CLS_ID, 10, 11], [CLS_ID]]
        ids, original, pad_mask, index, targets = masked_batch(rows, 1, np.random.default_rng(0))
        assert ids.shape == original.shape == pad_mask.shape == (3, 21)
        assert np.all(ids[:, 0] == CLS_ID)
        assert [int(np.sum(row == MASK_ID)) for row in ids] == [3, 1, 0]
        assert np.array_equal(targets, original.reshape(-1)[index])
        assert np.all(ids.reshape(-1)[index] == MASK_ID)
        assert np.array_equal(pad_mask[1], np.arange(21) >= 3)
        assert np.all(original[2, 1:] == PAD_ID)

    def test_unmasked_tokens_are_kept(self):
        """Only the chosen positions change."""
        rows = [[CLS_ID, *range(10, 20)] for _ in range(4)]
        ids, original, _, index, _ = masked_batch(rows, 1, np.random.default_rng(3))
        changed = np.flatnonzero(ids.reshape(-1) != original.reshape(-1))
        assert np.array_equal(changed, index)


class TestPretrainMlm:
    def test_loss_falls_and_marks_the_model(self):
        """A few epochs lower the masked-token loss and flag the base as pretrained."""
        tokenizer, sequences = title_sequences()
        model = EncoderModel(desk_config(len(tokenizer.vocab), 32), MlmHead(), seed=0)
        assert not model.pretrained
        losses = pretrain_mlm(model, sequences, 1, epochs=8, lr=2e-3, batch_size=8)
        assert len(losses) == 8
        assert losses[-1] < losses[0]
        assert model.pretrained

    def test_reproducible(self):
        """The same seed gives the same losses and weights."""
        tokenizer, sequences = title_sequences(3, 4)
        first = EncoderModel(desk_config(len(tokenizer.vocab), 32), MlmHead(), seed=1)
        second = EncoderModel(desk_config(len(tokenizer.vocab), 32), MlmHead(), seed=1)
        assert pretrain_mlm(first, sequences, 1, epochs=2, lr=2e-3, seed=4) == pretrain_mlm(
            second, sequences, 1, epochs=2, lr=2e-3, seed=4
        )
        for name, data in first.state_dict().items():
            assert np.array_equal(second[name].data, data), name

    def test_zero_epochs_leave_the_base_alone(self):
        """Without epochs nothing is trained and the base still follows from the seed."""
        tokenizer, sequences = title_sequences(2, 3)
        model = EncoderModel(desk_config(len(tokenizer.vocab), 32), MlmHead(), seed=0)
        assert pretrain_mlm(model, sequences, 1, epochs=0, lr=2e-3) == []
        assert not model.pretrained


class TestPretrainErrors:
    def test_needs_an_mlm_head(self):
        """A classifier model cannot be warmed up directly."""
        model = EncoderModel(desk_config(20, 16), ClassifierHead(n_classes=2), seed=0)
        with pytest.raises(ConfigError, match="MLM head"):
            pretrain_mlm(model, [[CLS_ID, 10, 11]], 1, epochs=1, lr=1e-3)

    def test_adapters_come_after(self):
        """Warm-up trains the base, so adapters must not be injected yet."""
        model = EncoderModel(desk_config(20, 16), MlmHead(), seed=0)
        inject_adapters(model, rank=2)
        with pytest.raises(ConfigError, match="adapters"):
            pretrain_mlm(model, [[CLS_ID, 10, 11]], 1, epochs=1, lr=1e-3)

    def test_nothing_to_mask(self):
        """Sequences made only of the fixed prefix are rejected."""
        model = EncoderModel(desk_config(20, 16), MlmHead(), seed=0)
        with pytest.raises(ConfigError, match="no sequence"):
            pretrain_mlm(model, [[CLS_ID], [CLS_ID]], 1, epochs=1, lr=1e-3)
