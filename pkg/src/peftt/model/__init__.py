from .adapters import (
    AdapterMode,
    AdapterSet,
    InjectionPoint,
    LoraPair,
    build_adapter_set,
    inject_adapters,
    lora_forward,
    sequential_adapter_forward,
    trainable_parameters,
)
from .config import (
    MODEL_CATALOG,
    CatalogEntry,
    EncoderConfig,
    ModelFamily,
    desk_config,
    get_catalog_entry,
    model_family,
)
from .encoder import ClassifierHead, EncoderModel, HeadSpec, MlmHead, count_parameters, forward_mlm

__all__ = [
    "MODEL_CATALOG",
    "AdapterMode",
    "AdapterSet",
    "CatalogEntry",
    "ClassifierHead",
    "EncoderConfig",
    "EncoderModel",
    "HeadSpec",
    "InjectionPoint",
    "LoraPair",
    "MlmHead",
    "ModelFamily",
    "build_adapter_set",
    "count_parameters",
    "desk_config",
    "forward_mlm",
    "get_catalog_entry",
    "inject_adapters",
    "lora_forward",
    "model_family",
    "sequential_adapter_forward",
    "trainable_parameters",
]
