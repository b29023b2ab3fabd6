from glw.numerics.tensor import (
    Tape,
    Tensor,
    add,
    affine,
    backward,
    concat_columns,
    logistic,
    loss_mse,
    matmul,
    mul,
    nonlinear,
    reduce_mean,
    reduce_sum,
    relu,
    softmax_cross_entropy,
    square,
    sub,
    sum_squares,
    take_rows,
    tanh,
    tensor,
    transpose,
    zero_grads,
)
from glw.numerics.optim import SGD, Adam, Optimizer, OptState, opt_step
from glw.numerics.gradcheck import max_relative_error, numeric_grad

__all__ = [
    "Tape", "Tensor", "add", "affine", "backward", "concat_columns", "logistic", "loss_mse",
    "matmul", "mul", "nonlinear", "reduce_mean", "reduce_sum", "relu", "softmax_cross_entropy",
    "square", "sub", "sum_squares", "take_rows", "tanh", "tensor", "transpose", "zero_grads",
    "SGD", "Adam", "Optimizer", "OptState", "opt_step", "max_relative_error", "numeric_grad",
]
