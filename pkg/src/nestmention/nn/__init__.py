"""Small reverse-mode autodiff layer: just what the parser needs."""

from .autodiff import (
    Parameter,
    Tape,
    Tensor,
    add,
    affine,
    concat,
    dropout,
    hidden,
    lstm_cell,
    lstm_step,
    masked_softmax,
    masked_softmax_nll,
    matmul,
    mul,
    scale,
    sigmoid,
    slice_,
    take,
    tanh,
    total,
)
from .checkpoint import CheckpointError, load_arrays, save_arrays
from .gradcheck import grad_check, relative_error
from .optim import AdamState, adam_step, add_l2_gradient, clip_global_norm, global_norm

__all__ = [
    "AdamState",
    "CheckpointError",
    "Parameter",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "add_l2_gradient",
    "affine",
    "clip_global_norm",
    "concat",
    "dropout",
    "global_norm",
    "grad_check",
    "hidden",
    "load_arrays",
    "lstm_cell",
    "lstm_step",
    "masked_softmax",
    "masked_softmax_nll",
    "matmul",
    "mul",
    "relative_error",
    "save_arrays",
    "scale",
    "sigmoid",
    "slice_",
    "take",
    "tanh",
    "total",
]
