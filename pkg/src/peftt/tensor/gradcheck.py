"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
from pydantic import BaseModel, Field

from peftt.exceptions import GradientError
from peftt.tensor.base import Tensor, backward, current_tape, no_grad
from peftt.utilities.logging import get_logger

logger = get_logger(__name__)

# Five-point central stencil: truncation error shrinks with step**4.
_STENCIL_OFFSETS = (2.0, 1.0, -1.0, -2.0)
_STENCIL_WEIGHTS = np.array([-1.0, 8.0, -8.0, 1.0]) / 12.0


class GradCheckEntry(BaseModel):
    """One compared element."""

    tensor: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    relative_error: float


class GradCheckReport(BaseModel):
    """Outcome of a finite-difference comparison over a set of tensors."""

    checked: int = Field(description="Elements compared against central differences")
    skipped: int = Field(description="Elements whose analytic gradient was below the threshold")
    max_relative_error: float = 0.0
    failures: list[GradCheckEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    *,
    step: float = 1e-3,
    rtol: float = 1e-4,
    atol: float = 1e-8,
    threshold: float = 1e-8,
    max_entries_per_tensor: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare tape gradients with five-point central differences of `loss_fn` at spacing `step`.

    `params` must be float64 leaves. Elements whose analytic gradient is at
    most `threshold` in magnitude are skipped. An element fails when both its
    absolute difference exceeds `atol` and its relative error
    |a - n| / max(|a|, |n|) exceeds `rtol`.
    """
    for param in params:
        if param.dtype != np.float64:
            raise GradientError(f"gradient check needs float64 tensors, {param.name or 'tensor'} is {param.dtype}")
        param.zero_grad()

    current_tape().clear()
    backward(loss_fn())
    analytic = {id(p): (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for p in params}

    rng = np.random.default_rng(seed)
    checked = skipped = 0
    worst = 0.0
    failures: list[GradCheckEntry] = []

    with no_grad():
        for position, param in enumerate(params):
            grads = analytic[id(param)]
            indices = [tuple(int(i) for i in idx) for idx in np.ndindex(param.shape)]
            if max_entries_per_tensor is not None and len(indices) > max_entries_per_tensor:
                chosen = rng.choice(len(indices), size=max_entries_per_tensor, replace=False)
                indices = [indices[i] for i in sorted(chosen)]

            for index in indices:
                expected = float(grads[index])
                if abs(expected) <= threshold:
                    skipped += 1
                    continue
                original = param.data[index]
                values: list[float] = []
                for offset in _STENCIL_OFFSETS:
                    param.data[index] = original + offset * step
                    values.append(loss_fn().item())
                param.data[index] = original

                numeric = float(np.dot(_STENCIL_WEIGHTS, values)) / step
                difference = abs(expected - numeric)
                relative = difference / max(abs(expected), abs(numeric))
                checked += 1
                worst = max(worst, relative)
                if difference > atol and relative > rtol:
                    failures.append(
                        GradCheckEntry(
                            tensor=param.name or f"param[{position}]",
                            index=index,
                            analytic=expected,
                            numeric=numeric,
                            relative_error=relative,
                        )
                    )

    if failures:
        logger.warning(f"Gradient check found {len(failures)} mismatches out of {checked} elements")
    return GradCheckReport(checked=checked, skipped=skipped, max_relative_error=worst, failures=failures)
