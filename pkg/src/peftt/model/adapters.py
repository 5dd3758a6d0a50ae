"""Low-rank adapters attached to the attention-output and second feed-forward projections."""

from __future__ import annotations

from collections.abc import Iterator
from typing import TYPE_CHECKING, Literal

import numpy as np
from numpy.typing import DTypeLike
from pydantic import BaseModel, ConfigDict, Field

from peftt.exceptions import AdapterError, ShapeError
from peftt.model.config import EncoderConfig
from peftt.tensor import Tensor, add, matmul, reshape, transpose
from peftt.utilities.logging import get_logger

if TYPE_CHECKING:
    from peftt.model.encoder import EncoderModel

logger = get_logger(__name__)

AdapterMode = Literal["parallel_lora", "sequential"]
AdapterSlot = Literal["attention_output", "ffn_output"]
ADAPTER_SLOTS: tuple[AdapterSlot, ...] = ("attention_output", "ffn_output")


class InjectionPoint(BaseModel):
    """A projection that carries an adapter."""

    model_config = ConfigDict(frozen=True)

    layer: int = Field(ge=0)
    slot: AdapterSlot

    @property
    def prefix(self) -> str:
        return f"adapters.layers.{self.layer}.{self.slot}"


class LoraPair:
    """The trainable factors A [r x d_a] and B [d_out x r] of one adapter.

    In parallel mode A reads the projection input (d_a = d_in); in
    sequential mode A reads the projection output (d_a = d_out).
    """

    def __init__(self, point: InjectionPoint, lora_a: Tensor, lora_b: Tensor, mode: AdapterMode):
        if lora_a.ndim != 2 or lora_b.ndim != 2 or lora_a.shape[0] != lora_b.shape[1]:
            raise ShapeError(f"LoRA factors disagree on rank: A {lora_a.shape}, B {lora_b.shape}")
        self.point = point
        self.lora_a = lora_a
        self.lora_b = lora_b
        self.mode = mode

    @property
    def rank(self) -> int:
        return self.lora_a.shape[0]

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield f"{self.point.prefix}.lora_A", self.lora_a
        yield f"{self.point.prefix}.lora_B", self.lora_b

    def num_parameters(self) -> int:
        return self.lora_a.size + self.lora_b.size


def _as_rows(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 1:
        return reshape(x, (1, x.shape[0])), True
    if x.ndim == 2:
        return x, False
    raise ShapeError(f"adapter input must be a vector or a [N, d] matrix, got shape {x.shape}")


def _project(rows: Tensor, weight: Tensor) -> Tensor:
    return matmul(rows, transpose(weight))


def lora_forward(x: Tensor, base_weight: Tensor, pair: LoraPair, bias: Tensor | None = None) -> Tensor:
    """W0 x + b + B (A x) for a vector or each row of a matrix."""
    rows, squeeze = _as_rows(x)
    d_out, d_in = base_weight.shape
    if rows.shape[1] != d_in or pair.lora_a.shape[1] != d_in or pair.lora_b.shape[0] != d_out:
        raise ShapeError(
            f"parallel adapter shapes disagree: x {x.shape}, W0 {base_weight.shape}, "
            f"A {pair.lora_a.shape}, B {pair.lora_b.shape}"
        )
    out = _project(rows, base_weight)
    if bias is not None:
        out = add(out, bias)
    out = add(out, _project(_project(rows, pair.lora_a), pair.lora_b))
    return reshape(out, (d_out,)) if squeeze else out


def sequential_adapter_forward(x: Tensor, base_weight: Tensor, pair: LoraPair, bias: Tensor | None = None) -> Tensor:
    """B (A (W0 x + b)): the adapter consumes the frozen projection's output."""
    rows, squeeze = _as_rows(x)
    d_out, d_in = base_weight.shape
    if rows.shape[1] != d_in or pair.lora_a.shape[1] != d_out or pair.lora_b.shape[0] != d_out:
        raise ShapeError(
            f"sequential adapter shapes disagree: x {x.shape}, W0 {base_weight.shape}, "
            f"A {pair.lora_a.shape}, B {pair.lora_b.shape}"
        )
    hidden = _project(rows, base_weight)
    if bias is not None:
        hidden = add(hidden, bias)
    out = _project(_project(hidden, pair.lora_a), pair.lora_b)
    return reshape(out, (d_out,)) if squeeze else out


class AdapterSet:
    """All adapter pairs of one encoder, keyed by injection point."""

    def __init__(self, pairs: dict[InjectionPoint, LoraPair], rank: int, mode: AdapterMode):
        self.pairs = pairs
        self.rank = rank
        self.mode = mode

    def __contains__(self, point: object) -> bool:
        return point in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def apply(self, point: InjectionPoint, rows: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
        pair = self.pairs[point]
        if self.mode == "parallel_lora":
            return lora_forward(rows, weight, pair, bias)
        return sequential_adapter_forward(rows, weight, pair, bias)

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for pair in self.pairs.values():
            yield from pair.named_parameters()

    def num_parameters(self) -> int:
        return sum(pair.num_parameters() for pair in self.pairs.values())

    def astype(self, dtype: DTypeLike) -> AdapterSet:
        pairs = {
            point: LoraPair(point, pair.lora_a.astype(dtype), pair.lora_b.astype(dtype), pair.mode)
            for point, pair in self.pairs.items()
        }
        return AdapterSet(pairs, self.rank, self.mode)


def _slot_shape(config: EncoderConfig, slot: AdapterSlot) -> tuple[int, int]:
    """(d_out, d_in) of the frozen projection behind a slot."""
    if slot == "attention_output":
        return config.d_model, config.d_model
    return config.d_model, config.d_ff


def build_adapter_set(
    config: EncoderConfig,
    rank: int,
    mode: AdapterMode = "parallel_lora",
    *,
    seed: int = 0,
    dtype: DTypeLike = np.float32,
) -> AdapterSet:
    """Create adapter pairs for every layer of an encoder shape.

    Parallel pairs start with A ~ N(0, init_std) and B = 0 so the adapted
    projection equals the frozen one. Sequential pairs draw both factors.
    """
    if rank < 1:
        raise AdapterError(f"adapter rank must be at least 1, got {rank}")
    rng = np.random.default_rng(seed)
    pairs: dict[InjectionPoint, LoraPair] = {}
    for layer in range(config.n_layers):
        for slot in ADAPTER_SLOTS:
            d_out, d_in = _slot_shape(config, slot)
            a_width = d_in if mode == "parallel_lora" else d_out
            if rank > min(d_out, a_width):
                raise AdapterError(f"rank {rank} exceeds min(d_out, d_in) = {min(d_out, a_width)} for {slot}")
            point = InjectionPoint(layer=layer, slot=slot)
            lora_a = Tensor(
                rng.normal(0.0, config.init_std, size=(rank, a_width)),
                requires_grad=True,
                name=f"{point.prefix}.lora_A",
                dtype=dtype,
            )
            if mode == "parallel_lora":
                b_init = np.zeros((d_out, rank))
            else:
                b_init = rng.normal(0.0, config.init_std, size=(d_out, rank))
            lora_b = Tensor(b_init, requires_grad=True, name=f"{point.prefix}.lora_B", dtype=dtype)
            pairs[point] = LoraPair(point, lora_a, lora_b, mode)
    return AdapterSet(pairs, rank, mode)


def inject_adapters(
    model: EncoderModel, rank: int, mode: AdapterMode = "parallel_lora", *, seed: int | None = None
) -> AdapterSet:
    """Attach adapters to every layer and freeze all base parameters, heads included."""
    if model.adapters is not None:
        raise AdapterError("model already carries adapters")
    adapter_seed = seed if seed is not None else model.seed + 1
    adapters = build_adapter_set(model.config, rank, mode, seed=adapter_seed, dtype=model.dtype)
    model.freeze_base()
    model.adapters = adapters
    logger.info(
        f"Injected {len(adapters)} {mode} adapters of rank {rank} "
        f"({adapters.num_parameters()} trainable parameters)"
    )
    return adapters


def trainable_parameters(model: EncoderModel) -> tuple[list[Tensor], int]:
    """Tensors that require grad, and their total element count."""
    tensors = [tensor for _, tensor in model.named_parameters() if tensor.requires_grad]
    return tensors, sum(tensor.size for tensor in tensors)
