"""Encoder hyper-parameters and the catalog of published pretrained encoders."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from peftt.exceptions import ConfigError
from peftt.text.vocab import N_SPECIAL_TOKENS

ModelFamily = Literal["cino", "tibert", "tibetan-bert", "custom"]


class EncoderConfig(BaseModel):
    """Shape of a post-LN transformer encoder."""

    model_config = ConfigDict(frozen=True)

    n_layers: int = Field(ge=0, description="Number of transformer layers")
    d_model: int = Field(gt=0, description="Hidden width")
    d_ff: int = Field(gt=0, description="Feed-forward inner width")
    n_heads: int = Field(gt=0)
    vocab_size: int = Field(description="Token table rows, special tokens included")
    max_len: int = Field(gt=0, description="Position table rows")
    tie_word_embeddings: bool = False
    layer_norm_eps: float = Field(default=1e-12, gt=0)
    init_std: float = Field(default=0.02, gt=0)
    inferred_dims: bool = Field(
        default=False,
        description="True when the hidden sizes were inferred from the model family rather than published",
    )

    @model_validator(mode="after")
    def _check_shape(self) -> EncoderConfig:
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        if self.vocab_size < N_SPECIAL_TOKENS:
            raise ValueError(f"vocab_size must be at least {N_SPECIAL_TOKENS} to hold the special tokens")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


class CatalogEntry(BaseModel):
    key: str
    family: ModelFamily
    display_name: str
    config: EncoderConfig


def _published(
    key: str, family: ModelFamily, name: str, layers: int, d: int, d_ff: int, heads: int, vocab: int
) -> CatalogEntry:
    config = EncoderConfig(
        n_layers=layers, d_model=d, d_ff=d_ff, n_heads=heads, vocab_size=vocab, max_len=512, inferred_dims=True
    )
    return CatalogEntry(key=key, family=family, display_name=name, config=config)


MODEL_CATALOG: dict[str, CatalogEntry] = {
    entry.key: entry
    for entry in (
        _published("cino-small", "cino", "CINO-small-v2", 6, 768, 3072, 12, 135359),
        _published("cino-base", "cino", "CINO-base-v2", 12, 768, 3072, 12, 135359),
        _published("cino-large", "cino", "CINO-large-v2", 24, 1024, 4096, 16, 135359),
        _published("tibert", "tibert", "TiBERT", 12, 768, 3072, 12, 30005),
        _published("tibetan-bert", "tibetan-bert", "Tibetan-BERT", 12, 768, 3072, 12, 32267),
    )
}

DESK_LAYERS = 2
DESK_WIDTH = 32
DESK_FF = 64
DESK_HEADS = 2


def get_catalog_entry(key: str) -> CatalogEntry:
    try:
        return MODEL_CATALOG[key]
    except KeyError:
        known = ", ".join(MODEL_CATALOG)
        raise ConfigError(f"Unknown model {key!r}; expected one of: {known}") from None


def model_family(key: str) -> ModelFamily:
    """Family of a catalog key; anything else is a custom encoder."""
    entry = MODEL_CATALOG.get(key)
    return entry.family if entry else "custom"


def desk_config(vocab_size: int, max_len: int = 108) -> EncoderConfig:
    """The small encoder every training scenario actually runs on."""
    return EncoderConfig(
        n_layers=DESK_LAYERS,
        d_model=DESK_WIDTH,
        d_ff=DESK_FF,
        n_heads=DESK_HEADS,
        vocab_size=vocab_size,
        max_len=max_len,
    )
