import numpy as np
import pytest
from pydantic import ValidationError

from peftt.exceptions import TemplateError, VerbalizerError
from peftt.prompts import Template, Verbalizer, classify, project_verbalizer, wrap
from peftt.prompts.base import classify_batch
from peftt.tensor import Tensor
from peftt.text.tokenizer import Tokenizer
from peftt.text.vocab import MASK_ID, PAD_ID, Vocabulary

SYLLABLES = ["ཀ་", "ཁ་", "ག་", "ང་", "ཅ་", "ཆ་", "News", "Classification:"]


@pytest.fixture
def tokenizer() -> Tokenizer:
    return Tokenizer(Vocabulary(SYLLABLES))


class TestTemplate:
    def test_slots_are_required_once(self):
        """Exactly one mask slot and one text slot."""
        for text in ("{text}", "{mask}", "{mask} {mask} {text}", "{mask} {text} {text}"):
            with pytest.raises(ValidationError):
                Template(text=text)

    def test_parts_and_literals(self):
        """Literal text is kept around and between the slots."""
        template = Template(text="News {text} Classification: {mask}")
        assert [kind for kind, _ in template.parts] == ["literal", "text", "literal", "mask"]
        assert template.literal_text.split() == ["News", "Classification:"]

    def test_from_prefix(self):
        """A prefix builds the prefix-mask-text form."""
        assert Template.from_prefix("News Classification:").text == "News Classification: {mask} {text}"
        assert Template.from_prefix("  ").text == "{mask} {text}"

    def test_render(self):
        """Rendering substitutes the mask token and normalizes spaces."""
        template = Template(text="News Classification: {mask}  {text}")
        assert template.render("ཀ་ཁ་") == "News Classification: [MASK] ཀ་ཁ་"


class TestWrap:
    def test_prefix_template(self, tokenizer: Tokenizer):
        """The mask follows the literal prefix and the text follows the mask."""
        template = Template(text="News Classification: {mask} {text}")
        wrapped = wrap(template, "ཀ་ཁ་", tokenizer, max_len=8, label=1)
        assert wrapped.token_ids == [11, 12, MASK_ID, 5, 6, PAD_ID, PAD_ID, PAD_ID]
        assert wrapped.pad_mask == [False] * 5 + [True] * 3
        assert wrapped.mask_position == 2
        assert wrapped.label == 1

    def test_truncates_only_the_text(self, tokenizer: Tokenizer):
        """A long text is cut so the template and mask survive."""
        template = Template(text="{text} News {mask}")
        wrapped = wrap(template, "ཀ་ཁ་ག་ང་ཅ་ཆ་", tokenizer, max_len=5)
        assert wrapped.token_ids == [5, 6, 7, 11, MASK_ID]
        assert wrapped.mask_position == 4
        assert wrapped.token_ids.count(MASK_ID) == 1
        assert len(wrapped.token_ids) == 5

    def test_template_longer_than_max_len(self, tokenizer: Tokenizer):
        """When the template alone does not fit, wrapping fails."""
        template = Template(text="News Classification: {mask} {text}")
        with pytest.raises(TemplateError):
            wrap(template, "ཀ་", tokenizer, max_len=2)

    def test_template_exactly_fills(self, tokenizer: Tokenizer):
        """A template that uses every slot leaves no room for text."""
        template = Template(text="News {mask} {text}")
        wrapped = wrap(template, "ཀ་ཁ་", tokenizer, max_len=2)
        assert wrapped.token_ids == [11, MASK_ID]

    def test_empty_text(self, tokenizer: Tokenizer):
        """An empty title still produces a well-formed input."""
        wrapped = wrap(Template(text="{mask} {text}"), "", tokenizer, max_len=3)
        assert wrapped.token_ids == [MASK_ID, PAD_ID, PAD_ID]

    @pytest.mark.parametrize("text", ["News {mask} {text}", "{text} News {mask}", "{mask} {text} Classification:"])
    def test_any_text_length_keeps_the_mask(self, tokenizer: Tokenizer, text: str):
        """From empty up to four times max_len, inputs fill max_len exactly and keep one mask."""
        template = Template(text=text)
        max_len = 6
        for n in range(4 * max_len + 1):
            wrapped = wrap(template, "ཀ་" * n, tokenizer, max_len=max_len)
            kept = min(n, max_len - 2)
            assert len(wrapped.token_ids) == len(wrapped.pad_mask) == max_len
            assert wrapped.token_ids.count(MASK_ID) == 1
            assert wrapped.token_ids[wrapped.mask_position] == MASK_ID
            assert wrapped.token_ids.count(5) == kept
            assert wrapped.pad_mask.count(True) == max_len - 2 - kept


class TestVerbalizer:
    def test_from_words(self, tokenizer: Tokenizer):
        """Words resolve to token ids through the tokenizer."""
        verbalizer = Verbalizer.from_words(["a", "b"], {"a": ["ཀ་"], "b": ["ཁ་ག་", "ང་"]}, tokenizer)
        assert verbalizer.word_ids == [[[5]], [[6, 7], [8]]]
        assert verbalizer.n_classes == 2
        assert verbalizer.max_token_id == 8

    def test_missing_class(self, tokenizer: Tokenizer):
        """Every class needs at least one word."""
        with pytest.raises(VerbalizerError):
            Verbalizer.from_words(["a", "b"], {"a": ["ཀ་"]}, tokenizer)
        with pytest.raises(VerbalizerError):
            Verbalizer.from_words(["a", "b"], {"a": ["ཀ་"], "b": ["  "]}, tokenizer)

    def test_unknown_word(self, tokenizer: Tokenizer):
        """A label word the vocabulary cannot spell is named in the error."""
        with pytest.raises(VerbalizerError, match="ཇ་"):
            Verbalizer.from_words(["a", "b"], {"a": ["ཀ་"], "b": ["ཇ་"]}, tokenizer)
        with pytest.raises(VerbalizerError, match="ཀ་ཇ་"):
            Verbalizer.from_words(["a", "b"], {"a": ["ཀ་ཇ་"], "b": ["ཁ་"]}, tokenizer)

    def test_needs_two_classes(self):
        """A single class is not a classification task."""
        with pytest.raises(ValidationError):
            Verbalizer(label_names=["a"], label_words=[["x"]], word_ids=[[[5]]])

    def test_projection_averages(self, tokenizer: Tokenizer):
        """A class score is the mean over words of the mean over word tokens."""
        verbalizer = Verbalizer.from_words(["a", "b"], {"a": ["ཀ་"], "b": ["ཁ་ག་", "ང་"]}, tokenizer)
        logits = np.zeros(14)
        logits[5], logits[6], logits[7], logits[8] = 1.0, 2.0, 4.0, 6.0
        scores = project_verbalizer(Tensor(logits, dtype=np.float64), verbalizer)
        np.testing.assert_allclose(scores.data, [1.0, (3.0 + 6.0) / 2])
        batch = project_verbalizer(Tensor(np.stack([logits, -logits]), dtype=np.float64), verbalizer)
        np.testing.assert_allclose(batch.data, [[1.0, 4.5], [-1.0, -4.5]])

    def test_projection_ignores_a_constant_shift(self, tokenizer: Tokenizer):
        """Adding a constant to every vocabulary logit shifts all class scores equally."""
        words = {"a": ["ཀ་"], "b": ["ཁ་ག་", "ང་"], "c": ["ཅ་"]}
        verbalizer = Verbalizer.from_words(["a", "b", "c"], words, tokenizer)
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(5, 14))
        base = project_verbalizer(Tensor(logits, dtype=np.float64), verbalizer).data
        for shift in (-3.0, 0.5, 10.0):
            shifted = project_verbalizer(Tensor(logits + shift, dtype=np.float64), verbalizer).data
            np.testing.assert_allclose(shifted, base + shift, atol=1e-12)
            assert classify_batch(shifted).tolist() == classify_batch(base).tolist()

    def test_projection_checks_vocabulary(self, tokenizer: Tokenizer):
        """Label words must lie inside the logits' vocabulary."""
        verbalizer = Verbalizer.from_words(["a", "b"], {"a": ["ཀ་"], "b": ["ང་"]}, tokenizer)
        with pytest.raises(VerbalizerError):
            verbalizer.projection(8)

    def test_classify(self):
        """Arg-max with ties broken toward the lower index."""
        assert classify(Tensor([0.1, 0.7, 0.7])) == 1
        assert classify([3.0, -1.0]) == 0
        assert classify_batch([[0.0, 1.0], [2.0, 2.0]]).tolist() == [1, 0]
