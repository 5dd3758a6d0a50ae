from .base import Template, Verbalizer, WrappedInput, classify, classify_batch, project_verbalizer, wrap
from .manager import BUILTIN_TEMPLATES, PromptManager

__all__ = [
    "BUILTIN_TEMPLATES",
    "PromptManager",
    "Template",
    "Verbalizer",
    "WrappedInput",
    "classify",
    "classify_batch",
    "project_verbalizer",
    "wrap",
]
