"""Training scenarios: model family, fine-tuning mode and their hyper-parameters."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field

from peftt.exceptions import ConfigError
from peftt.model.adapters import AdapterMode
from peftt.model.config import EncoderConfig, model_family

Mode = Literal["full", "prompt", "adapter", "adapter_prompt"]
DESK_SUFFIX = "-desk"
DEFAULT_WARMUP_EPOCHS = 40
DEFAULT_WARMUP_LR = 2e-3

MODEL_PREFIXES: dict[str, str] = {
    "cino-small": "CS",
    "cino-base": "CB",
    "cino-large": "CL",
    "tibert": "T",
    "tibetan-bert": "TB",
}
MODE_SUFFIXES: dict[Mode, str] = {"full": "W", "prompt": "P", "adapter": "A", "adapter_prompt": "AP"}

ABBREVIATIONS: dict[str, tuple[str, Mode]] = {
    f"{prefix}{suffix}": (model, mode)
    for model, prefix in MODEL_PREFIXES.items()
    for mode, suffix in MODE_SUFFIXES.items()
}


def abbreviation_for(encoder_key: str, mode: Mode) -> str:
    return f"{MODEL_PREFIXES[encoder_key]}{MODE_SUFFIXES[mode]}"


def resolve_abbreviation(name: str) -> tuple[str, Mode, bool]:
    """Map e.g. `TBAP-desk` to (`tibetan-bert`, `adapter_prompt`, True)."""
    desk = name.lower().endswith(DESK_SUFFIX)
    base = name[: -len(DESK_SUFFIX)] if desk else name
    try:
        encoder_key, mode = ABBREVIATIONS[base.upper()]
    except KeyError:
        raise ConfigError(f"Unknown scenario {name!r}; expected one of {', '.join(ABBREVIATIONS)}") from None
    return encoder_key, mode, desk


def default_lr(encoder_key: str, mode: Mode) -> float:
    """Learning rate used for a model family and mode."""
    if mode == "full":
        return 5e-6
    if mode == "prompt":
        return 6e-6
    cino = model_family(encoder_key) == "cino"
    if mode == "adapter":
        return 1e-4 if cino else 3e-4
    return 1.5e-4 if cino else 5e-4


def default_batch_size(encoder_key: str, mode: Mode) -> int:
    if encoder_key == "cino-large" and mode in ("adapter", "adapter_prompt"):
        return 4
    return 16


class Scenario(BaseModel):
    """Everything that determines a training run apart from the data."""

    name: str
    encoder_key: str = Field(description="Catalog key of the model family, or 'custom'")
    mode: Mode
    desk: bool = Field(default=True, description="Train the desk-scale encoder instead of the published size")
    encoder: EncoderConfig | None = Field(
        default=None, description="Explicit architecture; the vocabulary size is set from the corpus"
    )
    lr: float | None = Field(default=None, gt=0)
    batch_size: int = Field(default=16, ge=1)
    epochs: int = Field(default=30, ge=1)
    max_len: int = Field(default=108, ge=2)
    rank: int = Field(default=8, ge=1)
    adapter_mode: AdapterMode = "parallel_lora"
    seed: int = Field(default=0, ge=0, lt=2**24)
    warmup_epochs: int = Field(
        default=DEFAULT_WARMUP_EPOCHS,
        ge=0,
        description="MLM warm-up epochs on the training titles; 0 keeps a random base",
    )
    warmup_lr: float = Field(default=DEFAULT_WARMUP_LR, gt=0)

    @classmethod
    def from_abbreviation(cls, name: str, **overrides: Any) -> Scenario:
        encoder_key, mode, desk = resolve_abbreviation(name)
        values: dict[str, Any] = {"batch_size": default_batch_size(encoder_key, mode)}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(name=name, encoder_key=encoder_key, mode=mode, desk=desk, **values)

    @property
    def uses_prompt(self) -> bool:
        return self.mode in ("prompt", "adapter_prompt")

    @property
    def uses_adapters(self) -> bool:
        return self.mode in ("adapter", "adapter_prompt")

    @property
    def learning_rate(self) -> float:
        return self.lr if self.lr is not None else default_lr(self.encoder_key, self.mode)
