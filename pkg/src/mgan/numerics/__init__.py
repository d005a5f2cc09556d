"""Dense tensors, reverse-mode differentiation, seeded randomness, gradient checking."""

from .gradcheck import EvaluationError, GradCheckReport, grad_check, relative_error
from .rng import ALGORITHM, Rng, init_uniform
from .tensor import (
    DimensionError,
    DomainError,
    TapeNode,
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    concat,
    cross_entropy,
    custom_op,
    elementwise_mul,
    embedding,
    is_grad_enabled,
    linear,
    lstm,
    masked_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    sigmoid_op,
    softmax,
    sq_euclidean,
    sub,
    take,
    tanh,
    tanh_op,
)
from .tensor import sum as sum_

__all__ = [
    "ALGORITHM", "DimensionError", "DomainError", "EvaluationError", "GradCheckReport",
    "Rng", "TapeNode", "Tensor", "add", "as_tensor", "broadcast_to", "concat",
    "cross_entropy", "custom_op", "elementwise_mul", "embedding", "grad_check", "init_uniform",
    "is_grad_enabled", "linear", "lstm", "masked_softmax", "matmul", "mean", "mul",
    "no_grad", "relative_error", "relu", "reshape", "sigmoid", "sigmoid_op", "softmax",
    "sq_euclidean", "sub", "sum_", "take", "tanh", "tanh_op",
]
