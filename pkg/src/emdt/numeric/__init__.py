from .adam import AdamState, NonFiniteGradientError, adam_update
from .autodiff import (
    OP_KINDS,
    ShapeError,
    Tape,
    Var,
    add,
    add_bias,
    backward,
    concat,
    forward_op,
    layer_norm,
    matmul,
    mse_loss,
    relu,
    scale,
    slice_rows,
    softmax,
    transpose,
)
from .prng import Prng


def next_gaussian(prng: Prng) -> float:
    return prng.next_gaussian()


__all__ = [
    "AdamState",
    "NonFiniteGradientError",
    "OP_KINDS",
    "Prng",
    "ShapeError",
    "Tape",
    "Var",
    "adam_update",
    "add",
    "add_bias",
    "backward",
    "concat",
    "forward_op",
    "layer_norm",
    "matmul",
    "mse_loss",
    "next_gaussian",
    "relu",
    "scale",
    "slice_rows",
    "softmax",
    "transpose",
]
