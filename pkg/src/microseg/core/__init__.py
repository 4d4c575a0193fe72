from .gradcheck import finite_diff_gradient, max_relative_error
from .optim import AdamWHyper, Parameter, adamw_step, layer_lr, zero_grad
from .tensor import (
    NonFiniteError,
    Tensor,
    as_tensor,
    broadcast_to,
    concat,
    cross_entropy,
    dropout,
    gelu,
    layer_norm,
    log_softmax,
    matmul,
    reshape,
    scaled_dot_attention,
    softmax,
    swap_last,
    take,
    transpose,
)

__all__ = [
    "AdamWHyper", "NonFiniteError", "Parameter", "Tensor", "adamw_step", "as_tensor",
    "broadcast_to", "concat", "cross_entropy", "dropout", "finite_diff_gradient", "gelu",
    "layer_lr", "layer_norm", "log_softmax", "matmul", "max_relative_error", "reshape",
    "scaled_dot_attention", "softmax", "swap_last", "take", "transpose", "zero_grad",
]
