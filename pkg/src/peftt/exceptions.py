"""Custom exceptions for peftt."""


class PefttError(Exception):
    """Base error for peftt."""


class ShapeError(PefttError):
    """Tensor shapes do not agree for an operation."""


class GradientError(PefttError):
    """Error in building or running the backward pass."""


class ConfigError(PefttError):
    """A configuration cannot be resolved or contradicts itself."""


class AdapterError(PefttError):
    """Error in adapter construction or injection."""


class TemplateError(PefttError):
    """Error in parsing or applying a prompt template."""


class VerbalizerError(PefttError):
    """Error in loading or applying a verbalizer."""


class VocabularyError(PefttError):
    """Error in vocabulary management."""


class CorpusFormatError(PefttError):
    """Malformed corpus input."""


class MetricsError(PefttError):
    """Invalid inputs to a metric."""


class OptimizerError(PefttError):
    """Error in an optimizer step."""


class CheckpointFormatError(PefttError):
    """A checkpoint file is not in the expected byte format."""


class AccountingError(PefttError):
    """Error in parameter accounting."""
