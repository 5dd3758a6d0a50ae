"""Differentiable primitives.

Every op checks shapes, computes its result with numpy in the dtype of its
inputs, and records a backward closure on the current tape when any input
requires grad.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from peftt.exceptions import ConfigError, ShapeError
from peftt.tensor.base import FloatArray, Tensor, apply_op

_GELU_C = float(np.sqrt(2.0 / np.pi))


def _swap_last(a: FloatArray) -> FloatArray:
    return np.swapaxes(a, -1, -2)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes must match exactly."""
    if a.ndim < 2 or b.ndim < 2 or a.ndim != b.ndim:
        raise ShapeError(f"matmul needs operands of equal rank >= 2, got {a.shape} @ {b.shape}")
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(grad: FloatArray) -> tuple[FloatArray, FloatArray]:
        return grad @ _swap_last(b_data), _swap_last(a_data) @ grad

    return apply_op("matmul", (a, b), a_data @ b_data, backward)


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    """Permute axes; by default swap the last two."""
    if axes is None:
        if x.ndim < 2:
            raise ShapeError(f"transpose needs rank >= 2, got shape {x.shape}")
        order = list(range(x.ndim))
        order[-1], order[-2] = order[-2], order[-1]
    else:
        order = list(axes)
        if sorted(order) != list(range(x.ndim)):
            raise ShapeError(f"invalid permutation {order} for shape {x.shape}")
    inverse = list(np.argsort(order))

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        return (np.transpose(grad, inverse),)

    return apply_op("transpose", (x,), np.ascontiguousarray(np.transpose(x.data, order)), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    target = tuple(shape)
    if int(np.prod(target)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} into {target}")
    source = x.shape

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        return (grad.reshape(source),)

    return apply_op("reshape", (x,), x.data.reshape(target), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum.

    `b` may match `a` exactly, be a row vector over the last axis of `a`
    (a bias), or a column vector with a trailing axis of size 1.
    """
    if a.shape == b.shape:
        kind = "same"
    elif b.ndim == 1 and a.ndim >= 1 and b.shape[0] == a.shape[-1]:
        kind = "row"
    elif b.ndim == a.ndim and b.shape[-1] == 1 and b.shape[:-1] == a.shape[:-1]:
        kind = "column"
    else:
        raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}")

    def backward(grad: FloatArray) -> tuple[FloatArray, FloatArray]:
        if kind == "same":
            return grad, grad
        if kind == "row":
            return grad, grad.reshape(-1, grad.shape[-1]).sum(axis=0)
        return grad, grad.sum(axis=-1, keepdims=True)

    return apply_op("add", (a, b), a.data + b.data, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} * {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(grad: FloatArray) -> tuple[FloatArray, FloatArray]:
        return grad * b_data, grad * a_data

    return apply_op("mul", (a, b), a_data * b_data, backward)


def scale(x: Tensor, factor: float) -> Tensor:
    def backward(grad: FloatArray) -> tuple[FloatArray]:
        return (grad * factor,)

    return apply_op("scale", (x,), x.data * x.data.dtype.type(factor), backward)


def sum_all(x: Tensor) -> Tensor:
    """Sum every element into a scalar."""
    source = x.shape

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        return (np.broadcast_to(grad, source).copy(),)

    return apply_op("sum", (x,), np.asarray(x.data.sum(), dtype=x.dtype), backward)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    data = x.data
    inner = _GELU_C * (data + 0.044715 * data**3)
    tanh = np.tanh(inner)
    out = 0.5 * data * (1.0 + tanh)

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * data**2)
        local = 0.5 * (1.0 + tanh) + 0.5 * data * (1.0 - tanh**2) * d_inner
        return (grad * local,)

    return apply_op("gelu", (x,), out.astype(data.dtype, copy=False), backward)


def softmax(x: Tensor, where: ArrayLike | None = None) -> Tensor:
    """Softmax over the last axis.

    `where` is a boolean array broadcastable to `x`; False entries are
    excluded (treated as -inf). Every row must keep at least one entry.
    """
    data = x.data
    if where is not None:
        mask = np.broadcast_to(np.asarray(where, dtype=bool), data.shape)
        if not mask.any(axis=-1).all():
            raise ShapeError("softmax mask leaves a row without any valid entry")
        data = np.where(mask, data, -np.inf)
    shifted = data - data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = (exp / exp.sum(axis=-1, keepdims=True)).astype(x.dtype, copy=False)

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        dot = (grad * out).sum(axis=-1, keepdims=True)
        return (out * (grad - dot),)

    return apply_op("softmax", (x,), out, backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then scale and shift."""
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be positive, got {eps}")
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(f"layer_norm parameters must have shape ({width},), got {gain.shape} and {bias.shape}")
    data = x.data
    centered = data - data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gain.data + bias.data
    gain_data = gain.data

    def backward(grad: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        flat_grad = grad.reshape(-1, width)
        d_gain = (flat_grad * normed.reshape(-1, width)).sum(axis=0)
        d_bias = flat_grad.sum(axis=0)
        d_normed = grad * gain_data
        d_x = inv_std * (
            d_normed
            - d_normed.mean(axis=-1, keepdims=True)
            - normed * (d_normed * normed).mean(axis=-1, keepdims=True)
        )
        return d_x, d_gain, d_bias

    return apply_op("layer_norm", (x, gain, bias), out.astype(data.dtype, copy=False), backward)


def embedding(weight: Tensor, ids: ArrayLike) -> Tensor:
    """Gather rows of a [rows x width] table; the result has shape [*ids.shape, width]."""
    if weight.ndim != 2:
        raise ShapeError(f"embedding table must be 2-D, got shape {weight.shape}")
    index = np.asarray(ids, dtype=np.int64)
    rows, width = weight.shape
    if index.size and (index.min() < 0 or index.max() >= rows):
        raise ShapeError(f"embedding index out of range for a table with {rows} rows")

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        d_weight = np.zeros((rows, width), dtype=grad.dtype)
        np.add.at(d_weight, index.reshape(-1), grad.reshape(-1, width))
        return (d_weight,)

    return apply_op("embedding", (weight,), weight.data[index], backward)


def take_positions(x: Tensor, positions: ArrayLike) -> Tensor:
    """Select one position per sequence: [B, T, d] and B indices give [B, d]."""
    if x.ndim != 3:
        raise ShapeError(f"take_positions needs a [B, T, d] tensor, got shape {x.shape}")
    index = np.asarray(positions, dtype=np.int64)
    batch, length, _ = x.shape
    if index.shape != (batch,):
        raise ShapeError(f"expected {batch} positions, got shape {index.shape}")
    if index.size and (index.min() < 0 or index.max() >= length):
        raise ShapeError(f"position out of range for sequences of length {length}")
    rows = np.arange(batch)
    source = x.shape

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        d_x = np.zeros(source, dtype=grad.dtype)
        d_x[rows, index] = grad
        return (d_x,)

    return apply_op("take_positions", (x,), x.data[rows, index], backward)


def cross_entropy(logits: Tensor, targets: ArrayLike) -> Tensor:
    """Mean negative log-likelihood of integer targets under row-wise softmax."""
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy needs [N, C] logits, got shape {logits.shape}")
    labels: NDArray[np.int64] = np.asarray(targets, dtype=np.int64)
    count, classes = logits.shape
    if labels.shape != (count,):
        raise ShapeError(f"expected {count} targets, got shape {labels.shape}")
    if count == 0:
        raise ShapeError("cross_entropy needs at least one row")
    if labels.min() < 0 or labels.max() >= classes:
        raise ShapeError(f"target out of range for {classes} classes")
    data = logits.data
    shifted = data - data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(count)
    loss = np.asarray(-log_probs[rows, labels].mean(), dtype=data.dtype)

    def backward(grad: FloatArray) -> tuple[FloatArray]:
        d_logits = np.exp(log_probs)
        d_logits[rows, labels] -= 1.0
        return (d_logits * (grad / count),)

    return apply_op("cross_entropy", (logits,), loss, backward)
