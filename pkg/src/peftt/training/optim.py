"""Adam over tensor leaves."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from peftt.exceptions import OptimizerError
from peftt.tensor import Tensor


@dataclass
class AdamState:
    """First and second moment estimates, one pair per parameter."""

    first_moments: list[NDArray[Any]] = field(default_factory=list)
    second_moments: list[NDArray[Any]] = field(default_factory=list)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_parameters(cls, params: Sequence[Tensor], **kwargs: Any) -> AdamState:
        return cls(
            first_moments=[np.zeros_like(p.data) for p in params],
            second_moments=[np.zeros_like(p.data) for p in params],
            **kwargs,
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[NDArray[Any] | None],
    state: AdamState,
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place.

    Frozen parameters and parameters without a gradient are left untouched.
    Nothing is updated when any gradient is non-finite.
    """
    if not len(params) == len(grads) == len(state.first_moments):
        raise OptimizerError(
            f"{len(params)} parameters, {len(grads)} gradients and "
            f"{len(state.first_moments)} moment buffers do not line up"
        )
    for param, grad in zip(params, grads):
        if grad is None:
            continue
        if grad.shape != param.data.shape:
            raise OptimizerError(f"gradient of {param.name} has shape {grad.shape}, expected {param.shape}")
        if not np.isfinite(grad).all():
            raise OptimizerError(f"non-finite gradient in {param.name or 'unnamed tensor'}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for param, grad, m, v in zip(params, grads, state.first_moments, state.second_moments):
        if grad is None or not param.requires_grad:
            continue
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.data -= (lr * update).astype(param.data.dtype, copy=False)


class Adam:
    """Adam bound to a fixed parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float, **kwargs: Any):
        if lr <= 0:
            raise OptimizerError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.state = AdamState.for_parameters(self.params, **kwargs)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr)

    def zero_grad(self) -> None:
        for param in self.params:
            param.grad = None
