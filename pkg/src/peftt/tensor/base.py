"""Dense tensors and the tape that records them for reverse-mode differentiation."""

from __future__ import annotations

import threading
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray

from peftt.exceptions import GradientError

FloatArray = NDArray[np.floating[Any]]
BackwardFn = Callable[[FloatArray], Sequence[FloatArray | None]]


class Tensor:
    """A dense n-dimensional float array that can take part in a computation tape.

    Tensors created directly are leaves. Tensors produced by operations in
    `peftt.tensor.ops` are interior nodes; only leaves accumulate `grad`.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "is_leaf")

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        name: str | None = None,
        dtype: DTypeLike = np.float32,
    ):
        self.data: FloatArray = np.array(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: FloatArray | None = None
        self.name = name
        self.is_leaf = True

    @classmethod
    def _from_op(cls, data: FloatArray, requires_grad: bool) -> Tensor:
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out.is_leaf = False
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    def numpy(self) -> FloatArray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise GradientError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def astype(self, dtype: DTypeLike) -> Tensor:
        """Copy into a new leaf of another dtype, keeping name and freeze state."""
        return Tensor(self.data, requires_grad=self.requires_grad, name=self.name, dtype=dtype)

    def backward(self) -> None:
        backward(self)

    def __add__(self, other: Tensor) -> Tensor:
        from peftt.tensor.ops import add

        return add(self, other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from peftt.tensor.ops import mul, scale

        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from peftt.tensor.ops import scale

        return scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from peftt.tensor.ops import matmul

        return matmul(self, other)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"


@dataclass(frozen=True)
class TapeRecord:
    """One primitive application: inputs, output and the closure computing input grads."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class ComputationTape:
    """Ordered record of primitive applications on one thread.

    Records are appended in execution order, so every input of a record was
    produced before it; walking the list backwards is a valid reverse topological order.
    """

    def __init__(self) -> None:
        self.records: list[TapeRecord] = []
        self.enabled = True

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        self.records.append(TapeRecord(op=op, inputs=inputs, output=output, backward=backward))

    def clear(self) -> None:
        self.records.clear()

    def __len__(self) -> int:
        return len(self.records)


_local = threading.local()


def current_tape() -> ComputationTape:
    """The tape of the calling thread, created on first use."""
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = ComputationTape()
        _local.tape = tape
    return tape


@contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording them."""
    tape = current_tape()
    previous = tape.enabled
    tape.enabled = False
    try:
        yield
    finally:
        tape.enabled = previous


def apply_op(op: str, inputs: Sequence[Tensor], data: FloatArray, backward_fn: BackwardFn) -> Tensor:
    """Wrap an op result, recording it when any input requires grad."""
    tape = current_tape()
    needs_grad = tape.enabled and any(t.requires_grad for t in inputs)
    out = Tensor._from_op(data, needs_grad)
    if needs_grad:
        tape.record(op, tuple(inputs), out, backward_fn)
    return out


def backward(loss: Tensor) -> None:
    """Populate `grad` on every leaf that requires grad and feeds `loss`.

    Gradients accumulate into existing `grad` buffers. The tape is cleared afterwards.
    """
    if loss.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GradientError("loss is not connected to any tensor that requires grad")

    tape = current_tape()
    seed = np.ones_like(loss.data)
    if loss.is_leaf:
        _accumulate(loss, seed)
        return

    pending: dict[int, FloatArray] = {id(loss): seed}
    for record in reversed(tape.records):
        grad_out = pending.pop(id(record.output), None)
        if grad_out is None:
            continue
        input_grads = record.backward(grad_out)
        for tensor, grad in zip(record.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor.is_leaf:
                _accumulate(tensor, grad)
            else:
                key = id(tensor)
                pending[key] = pending[key] + grad if key in pending else grad
    tape.clear()


def _accumulate(tensor: Tensor, grad: FloatArray) -> None:
    grad = np.asarray(grad, dtype=tensor.data.dtype).reshape(tensor.data.shape)
    if tensor.grad is None:
        tensor.grad = grad.copy()
    else:
        tensor.grad = tensor.grad + grad
