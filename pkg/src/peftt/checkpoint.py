"""Binary tensor checkpoints.

Layout (little-endian): the magic bytes ``PEFTT``, a format version byte and
a u32 tensor count; then per tensor a u16 name length, the UTF-8 name, a u8
rank, one u32 per dimension and the float32 payload in row-major order.

A ``meta.encoder`` tensor records the architecture, seed, head and adapter
settings. Adapter-only checkpoints omit base tensors; loading rebuilds the
base from the recorded seed, or reads it from a base-only checkpoint when the
base was warmed up and no longer follows from the seed.
"""

from __future__ import annotations

import math
import struct
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from peftt.exceptions import CheckpointFormatError
from peftt.model.adapters import AdapterMode, inject_adapters
from peftt.model.config import EncoderConfig
from peftt.model.encoder import ClassifierHead, EncoderModel, MlmHead
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

MAGIC = b"PEFTT"
FORMAT_VERSION = 1
META_TENSOR = "meta.encoder"

_MAX_DIM = 2**32 - 1
_MAX_NAME = 2**16 - 1
_MAX_RANK = 2**8 - 1
_ADAPTER_CODES: dict[AdapterMode | None, int] = {None: 0, "parallel_lora": 1, "sequential": 2}
_META_FIELDS = (
    "n_layers",
    "d_model",
    "d_ff",
    "n_heads",
    "vocab_size",
    "max_len",
    "tie_word_embeddings",
    "seed",
    "n_classes",
    "adapter_rank",
    "adapter_mode",
    "adapters_only",
    "base_vocab_size",
    "pretrained_base",
)


def write_tensors(path: Path | str, tensors: Mapping[str, NDArray[Any]]) -> int:
    """Write named arrays as float32; returns the number of bytes written."""
    chunks = [MAGIC, bytes([FORMAT_VERSION]), struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        if len(encoded) > _MAX_NAME:
            raise CheckpointFormatError(f"tensor name too long: {name[:40]}...")
        if array.ndim > _MAX_RANK:
            raise CheckpointFormatError(f"{name} has rank {array.ndim}, more than {_MAX_RANK}")
        if any(dim > _MAX_DIM for dim in array.shape):
            raise CheckpointFormatError(f"{name} has a dimension that overflows u32: {array.shape}")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<B{array.ndim}I", array.ndim, *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    payload = b"".join(chunks)
    Path(path).write_bytes(payload)
    return len(payload)


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CheckpointFormatError(f"{self.path}: truncated at byte {self.offset}, needed {size} more")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_tensors(path: Path | str) -> dict[str, NDArray[np.float32]]:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint (bad magic)")
    (version,) = reader.unpack("<B")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported format version {version}")
    (count,) = reader.unpack("<I")
    tensors: dict[str, NDArray[np.float32]] = {}
    for _ in range(count):
        (name_length,) = reader.unpack("<H")
        name = reader.take(name_length).decode("utf-8")
        (rank,) = reader.unpack("<B")
        shape = reader.unpack(f"<{rank}I")
        size = math.prod(shape)
        if size * 4 > len(reader.data) - reader.offset:
            raise CheckpointFormatError(f"{path}: {name} declares {shape}, more data than the file holds")
        tensors[name] = np.frombuffer(reader.take(size * 4), dtype="<f4").reshape(shape).astype(np.float32)
    if reader.offset != len(reader.data):
        raise CheckpointFormatError(f"{path}: {len(reader.data) - reader.offset} trailing bytes")
    return tensors


def _meta_vector(
    model: EncoderModel, adapters_only: bool, base_vocab_size: int, *, with_adapters: bool = True
) -> NDArray[np.float32]:
    config = model.config
    adapters = model.adapters if with_adapters else None
    values = {
        "n_layers": config.n_layers,
        "d_model": config.d_model,
        "d_ff": config.d_ff,
        "n_heads": config.n_heads,
        "vocab_size": config.vocab_size,
        "max_len": config.max_len,
        "tie_word_embeddings": int(config.tie_word_embeddings),
        "seed": model.seed,
        "n_classes": model.head.n_classes if isinstance(model.head, ClassifierHead) else 0,
        "adapter_rank": adapters.rank if adapters else 0,
        "adapter_mode": _ADAPTER_CODES[adapters.mode if adapters else None],
        "adapters_only": int(adapters_only),
        "base_vocab_size": base_vocab_size,
        "pretrained_base": int(model.pretrained),
    }
    if max(values.values()) >= 2**24:
        raise CheckpointFormatError("checkpoint metadata values must stay below 2**24")
    return np.asarray([values[field] for field in _META_FIELDS], dtype=np.float32)


def save_checkpoint(
    model: EncoderModel,
    path: Path | str,
    *,
    adapters_only: bool = False,
    base_only: bool = False,
    base_vocab_size: int | None = None,
) -> int:
    """Write a model; `adapters_only` keeps just the adapter tensors, `base_only` everything else.

    `base_vocab_size` is the vocabulary size the model was created with,
    before any resize; it lets an adapter-only checkpoint rebuild the base.
    """
    if adapters_only and base_only:
        raise CheckpointFormatError("adapters_only and base_only exclude each other")
    if adapters_only and model.adapters is None:
        raise CheckpointFormatError("adapters_only requested but the model has no adapters")
    base_vocab = base_vocab_size if base_vocab_size is not None else model.config.vocab_size
    meta = _meta_vector(model, adapters_only, base_vocab, with_adapters=not base_only)
    tensors: dict[str, NDArray[Any]] = {META_TENSOR: meta}
    for name, data in model.state_dict(include_base=not adapters_only).items():
        if not (base_only and name.startswith("adapters.")):
            tensors[name] = data
    written = write_tensors(path, tensors)
    logger.debug(
        "Wrote checkpoint",
        extra={"path": str(path), "tensors": len(tensors) - 1, "bytes": written, "adapters_only": adapters_only},
    )
    return written


def _base_model(values: Mapping[str, int], path: Path | str, base: Path | str | None) -> EncoderModel:
    config = EncoderConfig(
        n_layers=values["n_layers"],
        d_model=values["d_model"],
        d_ff=values["d_ff"],
        n_heads=values["n_heads"],
        vocab_size=values["base_vocab_size"],
        max_len=values["max_len"],
        tie_word_embeddings=bool(values["tie_word_embeddings"]),
    )
    n_classes = values["n_classes"]
    head = ClassifierHead(n_classes=n_classes) if n_classes else MlmHead()

    if values["adapters_only"] and base is not None:
        model = load_checkpoint(base)
        if model.adapters is not None:
            raise CheckpointFormatError(f"{base}: a base checkpoint must not carry adapters")
        expected = config.model_copy(update={"vocab_size": values["vocab_size"]})
        if model.config != expected or model.head != head:
            raise CheckpointFormatError(f"{base}: base does not match the architecture recorded in {path}")
        return model

    if values["adapters_only"] and values["pretrained_base"]:
        raise CheckpointFormatError(
            f"{path}: adapters were trained on a warmed-up base that does not follow from the seed; "
            "pass its base checkpoint"
        )
    model = EncoderModel(config, head, seed=values["seed"])
    model.resize_token_embeddings(values["vocab_size"])
    model.pretrained = bool(values["pretrained_base"])
    return model


def load_checkpoint(path: Path | str, *, base: Path | str | None = None) -> EncoderModel:
    """Read a checkpoint; `base` is the base-only checkpoint an adapter-only one may need."""
    tensors = read_tensors(path)
    meta = tensors.pop(META_TENSOR, None)
    if meta is None or meta.shape != (len(_META_FIELDS),):
        raise CheckpointFormatError(f"{path}: missing or malformed {META_TENSOR}")
    values = {field: int(value) for field, value in zip(_META_FIELDS, meta)}
    model = _base_model(values, path, base)

    mode_by_code = {code: mode for mode, code in _ADAPTER_CODES.items()}
    adapter_mode = mode_by_code.get(values["adapter_mode"])
    if values["adapter_rank"] and adapter_mode is not None:
        inject_adapters(model, values["adapter_rank"], adapter_mode)
    elif values["adapters_only"]:
        raise CheckpointFormatError(f"{path}: adapter-only checkpoint without adapter settings")

    model.load_state_dict(tensors, strict=not values["adapters_only"])
    logger.debug(
        "Loaded checkpoint",
        extra={"path": str(path), "tensors": len(tensors), "adapters_only": bool(values["adapters_only"])},
    )
    return model
