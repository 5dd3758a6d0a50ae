from .base import ComputationTape, TapeRecord, Tensor, backward, current_tape, no_grad
from .gradcheck import GradCheckEntry, GradCheckReport, check_gradients
from .ops import (
    add,
    cross_entropy,
    embedding,
    gelu,
    layer_norm,
    matmul,
    mul,
    reshape,
    scale,
    softmax,
    sum_all,
    take_positions,
    transpose,
)

__all__ = [
    "ComputationTape",
    "GradCheckEntry",
    "GradCheckReport",
    "TapeRecord",
    "Tensor",
    "add",
    "backward",
    "check_gradients",
    "cross_entropy",
    "current_tape",
    "embedding",
    "gelu",
    "layer_norm",
    "matmul",
    "mul",
    "no_grad",
    "reshape",
    "scale",
    "softmax",
    "sum_all",
    "take_positions",
    "transpose",
]
