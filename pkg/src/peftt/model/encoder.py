"""A post-LN transformer encoder with an MLM head or a classification head."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from typing import Annotated, Any, Literal

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray
from pydantic import BaseModel, Field

from peftt.exceptions import CheckpointFormatError, ShapeError, VocabularyError
from peftt.model.adapters import AdapterSet, InjectionPoint
from peftt.model.config import EncoderConfig
from peftt.tensor import (
    Tensor,
    add,
    embedding,
    gelu,
    layer_norm,
    matmul,
    reshape,
    scale,
    softmax,
    transpose,
)
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)


class MlmHead(BaseModel):
    """Transform, layer-norm and vocabulary projection."""

    kind: Literal["mlm"] = "mlm"


class ClassifierHead(BaseModel):
    """Linear layer over the [CLS] position."""

    kind: Literal["classifier"] = "classifier"
    n_classes: int = Field(ge=2)


HeadSpec = Annotated[MlmHead | ClassifierHead, Field(discriminator="kind")]


def count_parameters(config: EncoderConfig, head: MlmHead | ClassifierHead | None = None) -> int:
    """Element count of an encoder built from `config` with `head` (MLM by default)."""
    head = head or MlmHead()
    d, d_ff, vocab = config.d_model, config.d_ff, config.vocab_size
    embeddings = vocab * d + config.max_len * d
    attention = 4 * (d * d + d) + 2 * d
    ffn = (d_ff * d + d_ff) + (d * d_ff + d) + 2 * d
    if isinstance(head, MlmHead):
        head_count = (d * d + d) + 2 * d + (0 if config.tie_word_embeddings else vocab * d) + vocab
    else:
        head_count = head.n_classes * d + head.n_classes
    return embeddings + config.n_layers * (attention + ffn) + head_count


class EncoderModel:
    """Parameters of an encoder plus its forward pass.

    Linear weights are stored [d_out x d_in]. Parameter names follow
    `embeddings.*`, `layers.{i}.attention.*`, `layers.{i}.ffn.*`, `mlm.*`
    and `classifier.*`; adapter tensors live under `adapters.*`.
    `pretrained` is set once the base weights no longer follow from `seed`.
    """

    def __init__(
        self,
        config: EncoderConfig,
        head: MlmHead | ClassifierHead | None = None,
        *,
        seed: int = 0,
        dtype: DTypeLike = np.float32,
    ):
        self.config = config
        self.head: MlmHead | ClassifierHead = head or MlmHead()
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.adapters: AdapterSet | None = None
        self.pretrained = False
        self._params: dict[str, Tensor] = {}
        self._init_parameters(np.random.default_rng(seed))

    def _init_parameters(self, rng: np.random.Generator) -> None:
        config = self.config
        d, d_ff, std = config.d_model, config.d_ff, config.init_std

        def normal(name: str, *shape: int) -> None:
            self._add(name, rng.normal(0.0, std, size=shape))

        def zeros(name: str, *shape: int) -> None:
            self._add(name, np.zeros(shape))

        def ones(name: str, *shape: int) -> None:
            self._add(name, np.ones(shape))

        normal("embeddings.token.weight", config.vocab_size, d)
        normal("embeddings.position.weight", config.max_len, d)
        for i in range(config.n_layers):
            for proj in ("query", "key", "value", "output"):
                normal(f"layers.{i}.attention.{proj}.weight", d, d)
                zeros(f"layers.{i}.attention.{proj}.bias", d)
            ones(f"layers.{i}.attention.norm.gain", d)
            zeros(f"layers.{i}.attention.norm.bias", d)
            normal(f"layers.{i}.ffn.intermediate.weight", d_ff, d)
            zeros(f"layers.{i}.ffn.intermediate.bias", d_ff)
            normal(f"layers.{i}.ffn.output.weight", d, d_ff)
            zeros(f"layers.{i}.ffn.output.bias", d)
            ones(f"layers.{i}.ffn.norm.gain", d)
            zeros(f"layers.{i}.ffn.norm.bias", d)

        if isinstance(self.head, MlmHead):
            normal("mlm.transform.weight", d, d)
            zeros("mlm.transform.bias", d)
            ones("mlm.norm.gain", d)
            zeros("mlm.norm.bias", d)
            if not config.tie_word_embeddings:
                normal("mlm.decoder.weight", config.vocab_size, d)
            zeros("mlm.decoder.bias", config.vocab_size)
        else:
            normal("classifier.weight", self.head.n_classes, d)
            zeros("classifier.bias", self.head.n_classes)

    def _add(self, name: str, data: ArrayLike) -> None:
        self._params[name] = Tensor(data, requires_grad=True, name=name, dtype=self.dtype)

    # Parameter access

    def named_parameters(self, *, include_adapters: bool = True) -> Iterator[tuple[str, Tensor]]:
        yield from self._params.items()
        if include_adapters and self.adapters is not None:
            yield from self.adapters.named_parameters()

    def parameters(self, *, include_adapters: bool = True) -> list[Tensor]:
        return [tensor for _, tensor in self.named_parameters(include_adapters=include_adapters)]

    def __getitem__(self, name: str) -> Tensor:
        for key, tensor in self.named_parameters():
            if key == name:
                return tensor
        raise KeyError(name)

    def num_parameters(self, *, include_adapters: bool = False) -> int:
        return sum(t.size for t in self.parameters(include_adapters=include_adapters))

    def freeze_base(self) -> None:
        for tensor in self._params.values():
            tensor.requires_grad = False
            tensor.grad = None

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.grad = None

    def state_dict(self, *, include_base: bool = True) -> dict[str, NDArray[Any]]:
        """Copies of every tensor, optionally adapters only."""
        return {
            name: tensor.data.copy()
            for name, tensor in self.named_parameters()
            if include_base or name.startswith("adapters.")
        }

    def load_state_dict(self, state: Mapping[str, NDArray[Any]], *, strict: bool = True) -> None:
        own = dict(self.named_parameters())
        unknown = set(state) - set(own)
        if unknown:
            raise CheckpointFormatError(f"Unknown tensors in state: {', '.join(sorted(unknown))}")
        if strict and (missing := set(own) - set(state)):
            raise CheckpointFormatError(f"Missing tensors in state: {', '.join(sorted(missing))}")
        for name, data in state.items():
            target = own[name]
            if tuple(data.shape) != target.shape:
                raise CheckpointFormatError(f"{name} has shape {tuple(data.shape)}, expected {target.shape}")
            target.data[...] = data

    def astype(self, dtype: DTypeLike) -> EncoderModel:
        """Deep copy with every tensor cast, used for float64 gradient checks."""
        clone = EncoderModel.__new__(EncoderModel)
        clone.config = self.config
        clone.head = self.head
        clone.seed = self.seed
        clone.dtype = np.dtype(dtype)
        clone.pretrained = self.pretrained
        clone._params = {name: tensor.astype(dtype) for name, tensor in self._params.items()}
        clone.adapters = self.adapters.astype(dtype) if self.adapters is not None else None
        return clone

    def resize_token_embeddings(self, new_vocab_size: int) -> None:
        """Append rows for new tokens; existing rows and ids are untouched.

        New rows are drawn from N(0, init_std) with a generator seeded by the
        model seed and both sizes, so a resize is reproducible. New decoder
        bias entries are zero.
        """
        old = self.config.vocab_size
        if new_vocab_size < old:
            raise VocabularyError(f"cannot shrink vocabulary from {old} to {new_vocab_size}")
        if new_vocab_size == old:
            return
        extra = new_vocab_size - old
        rng = np.random.default_rng([self.seed, old, new_vocab_size])
        d, std = self.config.d_model, self.config.init_std

        def grow(name: str, rows: NDArray[Any]) -> None:
            current = self._params[name]
            tensor = Tensor(
                np.concatenate([current.data, rows.astype(self.dtype)]),
                requires_grad=current.requires_grad,
                name=name,
                dtype=self.dtype,
            )
            self._params[name] = tensor

        grow("embeddings.token.weight", rng.normal(0.0, std, size=(extra, d)))
        if "mlm.decoder.weight" in self._params:
            grow("mlm.decoder.weight", rng.normal(0.0, std, size=(extra, d)))
        if "mlm.decoder.bias" in self._params:
            grow("mlm.decoder.bias", np.zeros(extra))
        self.config = self.config.model_copy(update={"vocab_size": new_vocab_size})
        logger.info(f"Resized token embeddings from {old} to {new_vocab_size}")

    # Forward pass

    def _linear(self, rows: Tensor, prefix: str, point: InjectionPoint | None = None) -> Tensor:
        weight = self._params[f"{prefix}.weight"]
        bias = self._params[f"{prefix}.bias"]
        if point is not None and self.adapters is not None and point in self.adapters:
            return self.adapters.apply(point, rows, weight, bias)
        return add(matmul(rows, transpose(weight)), bias)

    def _norm(self, rows: Tensor, prefix: str) -> Tensor:
        return layer_norm(
            rows, self._params[f"{prefix}.gain"], self._params[f"{prefix}.bias"], self.config.layer_norm_eps
        )

    def _split_heads(self, rows: Tensor, batch: int, length: int) -> Tensor:
        heads, head_dim = self.config.n_heads, self.config.head_dim
        return transpose(reshape(rows, (batch, length, heads, head_dim)), (0, 2, 1, 3))

    def _layer(self, i: int, hidden: Tensor, key_valid: NDArray[np.bool_], batch: int, length: int) -> Tensor:
        prefix = f"layers.{i}"
        query = self._split_heads(self._linear(hidden, f"{prefix}.attention.query"), batch, length)
        key = self._split_heads(self._linear(hidden, f"{prefix}.attention.key"), batch, length)
        value = self._split_heads(self._linear(hidden, f"{prefix}.attention.value"), batch, length)

        scores = scale(matmul(query, transpose(key)), 1.0 / float(np.sqrt(self.config.head_dim)))
        context = matmul(softmax(scores, where=key_valid), value)
        context = reshape(transpose(context, (0, 2, 1, 3)), (batch * length, self.config.d_model))

        attended = self._linear(context, f"{prefix}.attention.output", InjectionPoint(layer=i, slot="attention_output"))
        hidden = self._norm(add(hidden, attended), f"{prefix}.attention.norm")
        inner = gelu(self._linear(hidden, f"{prefix}.ffn.intermediate"))
        projected = self._linear(inner, f"{prefix}.ffn.output", InjectionPoint(layer=i, slot="ffn_output"))
        return self._norm(add(hidden, projected), f"{prefix}.ffn.norm")

    def encode(self, token_ids: ArrayLike, pad_mask: ArrayLike | None = None) -> Tensor:
        """Hidden states [B, T, d] for token ids [B, T]; `pad_mask` is True at padding."""
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ShapeError(f"token ids must be [B, T], got shape {ids.shape}")
        batch, length = ids.shape
        if length > self.config.max_len:
            raise ShapeError(f"sequence length {length} exceeds max_len {self.config.max_len}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise VocabularyError(f"token id out of range for a vocabulary of {self.config.vocab_size}")
        padded = np.zeros(ids.shape, dtype=bool) if pad_mask is None else np.asarray(pad_mask, dtype=bool)
        if padded.shape != ids.shape:
            raise ShapeError(f"pad mask shape {padded.shape} does not match token ids {ids.shape}")
        key_valid = (~padded)[:, None, None, :]
        if not key_valid.any(axis=-1).all():
            raise ShapeError("every sequence needs at least one non-pad position")

        positions = np.broadcast_to(np.arange(length), ids.shape)
        hidden = add(
            embedding(self._params["embeddings.token.weight"], ids),
            embedding(self._params["embeddings.position.weight"], positions),
        )
        hidden = reshape(hidden, (batch * length, self.config.d_model))
        for i in range(self.config.n_layers):
            hidden = self._layer(i, hidden, key_valid, batch, length)
        return reshape(hidden, (batch, length, self.config.d_model))

    def mlm_logits(self, rows: Tensor) -> Tensor:
        """Vocabulary logits [N, V] for hidden rows [N, d]."""
        if not isinstance(self.head, MlmHead):
            raise ShapeError("model was built with a classifier head, not an MLM head")
        hidden = self._norm(gelu(self._linear(rows, "mlm.transform")), "mlm.norm")
        tied = self.config.tie_word_embeddings
        decoder = self._params["embeddings.token.weight" if tied else "mlm.decoder.weight"]
        return add(matmul(hidden, transpose(decoder)), self._params["mlm.decoder.bias"])

    def classifier_logits(self, rows: Tensor) -> Tensor:
        """Class logits [N, C] for hidden rows [N, d]."""
        if not isinstance(self.head, ClassifierHead):
            raise ShapeError("model was built with an MLM head, not a classifier head")
        return self._linear(rows, "classifier")


def forward_mlm(model: EncoderModel, token_ids: ArrayLike, pad_mask: ArrayLike | None = None) -> Tensor:
    """Vocabulary logits for every position: [T, V] for one sequence, [B, T, V] for a batch."""
    ids = np.asarray(token_ids, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = ids[None, :]
        pad_mask = None if pad_mask is None else np.asarray(pad_mask, dtype=bool)[None, :]
    hidden = model.encode(ids, pad_mask)
    batch, length, width = hidden.shape
    logits = model.mlm_logits(reshape(hidden, (batch * length, width)))
    vocab = logits.shape[-1]
    return reshape(logits, (length, vocab) if single else (batch, length, vocab))
