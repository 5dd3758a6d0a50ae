from pathlib import Path

import pytest

from peftt.exceptions import TemplateError, VerbalizerError
from peftt.prompts import PromptManager, Template
from peftt.prompts.manager import BUILTIN_TEMPLATES
from peftt.text.tokenizer import Tokenizer
from peftt.text.vocab import Vocabulary


class TestPromptManager:
    def test_builtin_templates(self):
        """The manager starts with the built-in templates."""
        manager = PromptManager()
        assert manager.list_templates() == list(BUILTIN_TEMPLATES)
        assert manager.get_template("news").text == "News Classification: {mask} {text}"

    def test_unknown_template(self):
        """Looking up a missing template raises."""
        with pytest.raises(TemplateError, match="Unknown template: nope"):
            PromptManager().get_template("nope")

    def test_add_template(self):
        """Added templates can be looked up by name."""
        manager = PromptManager()
        template = Template(text="{text} ? {mask}")
        assert manager.add_template("question", template) == template
        assert manager.get_template("question") == template

    def test_add_duplicate_template(self, caplog: pytest.LogCaptureFixture):
        """Adding a name twice keeps the first template and warns."""
        manager = PromptManager()
        first = manager.add_template("mine", Template(text="{mask} {text}"))
        second = manager.add_template("mine", Template(text="{text} {mask}"))
        assert first == second
        assert "Template already exists: mine" in caplog.text

    def test_disable_warn_on_duplicate_templates(self, caplog: pytest.LogCaptureFixture):
        """Duplicate warnings can be turned off."""
        manager = PromptManager(warn_on_duplicate_templates=False)
        manager.add_template("mine", Template(text="{mask} {text}"))
        manager.add_template("mine", Template(text="{mask} {text}"))
        assert "Template already exists" not in caplog.text

    def test_load_template(self, tmp_path: Path):
        """A template file is named after its stem."""
        path = tmp_path / "headline.txt"
        path.write_text("Headline: {mask}\n{text}\n", encoding="utf-8")
        manager = PromptManager()
        template = manager.load_template(path)
        assert template.text == "Headline: {mask} {text}"
        assert manager.get_template("headline") == template

    def test_load_invalid_template(self, tmp_path: Path):
        """A template file without a mask slot is rejected with its path."""
        path = tmp_path / "bad.txt"
        path.write_text("{text}", encoding="utf-8")
        with pytest.raises(TemplateError, match="bad.txt"):
            PromptManager().load_template(path)


class TestLabelWords:
    def test_load_label_words(self, tmp_path: Path):
        """Each line maps a label to comma-separated words."""
        path = tmp_path / "words.tsv"
        path.write_text("Politics\tཆབ་སྲིད, སྲིད་གཞུང\n\nArts\tསྒྱུ་རྩལ\n", encoding="utf-8")
        assert PromptManager.load_label_words(path) == {
            "Politics": ["ཆབ་སྲིད", "སྲིད་གཞུང"],
            "Arts": ["སྒྱུ་རྩལ"],
        }

    def test_malformed_line(self, tmp_path: Path):
        """Lines without a tab or without words name the offending line."""
        path = tmp_path / "words.tsv"
        path.write_text("Politics\tཆབ་སྲིད\nArts སྒྱུ་རྩལ\n", encoding="utf-8")
        with pytest.raises(VerbalizerError, match="words.tsv:2"):
            PromptManager.load_label_words(path)
        path.write_text("Politics\t , \n", encoding="utf-8")
        with pytest.raises(VerbalizerError, match="no words"):
            PromptManager.load_label_words(path)


class TestPrepareVerbalizer:
    def test_adds_unknown_words_as_single_tokens(self):
        """Words the vocabulary cannot spell are appended, one token each."""
        vocab = Vocabulary(["ཀ་", "ཁ་"])
        tokenizer = Tokenizer(vocab)
        verbalizer, added = PromptManager().prepare_verbalizer(
            ["Politics", "Arts"], {"Politics": ["ཆབ་སྲིད"], "Arts": ["སྒྱུ་རྩལ", "ཀ་ཁ་"]}, tokenizer
        )
        assert added == [7, 8]
        assert vocab.tokens[7:] == ["ཆབ་སྲིད", "སྒྱུ་རྩལ"]
        assert verbalizer.word_ids == [[[7]], [[8], [5, 6]]]

    def test_known_words_add_nothing(self):
        """Words made of known syllables are used as they are."""
        tokenizer = Tokenizer(Vocabulary(["ཀ་", "ཁ་"]))
        _, added = PromptManager().prepare_verbalizer(["a", "b"], {"a": ["ཀ་"], "b": ["ཁ་"]}, tokenizer)
        assert added == []
        assert len(tokenizer.vocab) == 7

    def test_add_missing_disabled(self):
        """Without permission to add tokens, unknown words are an error."""
        tokenizer = Tokenizer(Vocabulary(["ཀ་"]))
        with pytest.raises(VerbalizerError, match="not in vocabulary"):
            PromptManager().prepare_verbalizer(["a", "b"], {"a": ["ཀ་"], "b": ["ཟ་"]}, tokenizer, add_missing=False)

    def test_missing_class(self):
        """Every label needs words."""
        tokenizer = Tokenizer(Vocabulary(["ཀ་"]))
        with pytest.raises(VerbalizerError, match="b"):
            PromptManager().prepare_verbalizer(["a", "b"], {"a": ["ཀ་"]}, tokenizer)
