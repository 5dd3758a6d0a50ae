"""Template and verbalizer management."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from pathlib import Path

from pydantic import ValidationError

from peftt.exceptions import TemplateError, VerbalizerError
from peftt.prompts.base import Template, Verbalizer
from peftt.text.tokenizer import Tokenizer, preprocess_symbols, tokenize
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

BUILTIN_TEMPLATES: dict[str, str] = {
    "plain": "{mask} {text}",
    "news": "News Classification: {mask} {text}",
    "tibetan-news": "གསར་འགྱུར་ {mask} {text}",
}


class PromptManager:
    """Manages named templates and turns label words into verbalizers."""

    def __init__(self, warn_on_duplicate_templates: bool = True):
        self._templates: dict[str, Template] = {}
        self.warn_on_duplicate_templates = warn_on_duplicate_templates
        for name, text in BUILTIN_TEMPLATES.items():
            self._templates[name] = Template(text=text)

    def get_template(self, name: str) -> Template:
        template = self._templates.get(name)
        if template is None:
            raise TemplateError(f"Unknown template: {name}")
        return template

    def list_templates(self) -> list[str]:
        return list(self._templates)

    def add_template(self, name: str, template: Template) -> Template:
        existing = self._templates.get(name)
        if existing:
            if self.warn_on_duplicate_templates:
                logger.warning(f"Template already exists: {name}")
            return existing
        self._templates[name] = template
        return template

    def load_template(self, path: Path | str, name: str | None = None) -> Template:
        """Read a template file: the whole file is the template string."""
        path = Path(path)
        text = preprocess_symbols(path.read_text(encoding="utf-8"))
        try:
            template = Template(text=text)
        except ValidationError as e:
            raise TemplateError(f"Invalid template in {path}: {e.errors()[0]['msg']}") from e
        return self.add_template(name or path.stem, template)

    @staticmethod
    def load_label_words(path: Path | str) -> dict[str, list[str]]:
        """Read `label<TAB>word1,word2` lines."""
        path = Path(path)
        label_words: dict[str, list[str]] = {}
        for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            label, sep, words = line.partition("\t")
            if not sep or not label.strip():
                raise VerbalizerError(f"{path}:{number}: expected 'label<TAB>word[,word...]'")
            parsed = [word.strip() for word in words.split(",") if word.strip()]
            if not parsed:
                raise VerbalizerError(f"{path}:{number}: label {label!r} has no words")
            label_words.setdefault(label.strip(), []).extend(parsed)
        return label_words

    def prepare_verbalizer(
        self,
        label_names: Sequence[str],
        label_words: Mapping[str, Sequence[str]],
        tokenizer: Tokenizer,
        *,
        add_missing: bool = True,
    ) -> tuple[Verbalizer, list[int]]:
        """Build a verbalizer, first adding label words the vocabulary cannot spell.

        A whitespace chunk of a label word is added as one token when any of
        its syllables is unknown. Returns the verbalizer and the new token ids.
        """
        missing = [name for name in label_names if name not in label_words]
        if missing:
            raise VerbalizerError(f"no label words for classes: {', '.join(missing)}")

        new_tokens: list[str] = []
        for name in label_names:
            for word in label_words[name]:
                for chunk in preprocess_symbols(word).split():
                    if chunk in tokenizer.vocab or chunk in new_tokens:
                        continue
                    if any(piece not in tokenizer.vocab for piece in tokenize(chunk)):
                        new_tokens.append(chunk)

        added: list[int] = []
        if new_tokens:
            if not add_missing:
                raise VerbalizerError(f"label words not in vocabulary: {', '.join(new_tokens)}")
            added = tokenizer.vocab.add_tokens(new_tokens)
            logger.info(f"Added {len(added)} label-word tokens to the vocabulary")
        return Verbalizer.from_words(label_names, label_words, tokenizer), added
