"""Minimal numpy-backed tensor engine: tape autodiff, optimizer, distributions."""

from .tensor import (
    NumericError, Tensor, UsageError, backward, concatenate, conv2d,
    conv2d_transpose, default_dtype, embedding, exp, finite_checks, getitem,
    layer_norm, log, log_softmax, masked_softmax, matmul, no_grad, relu,
    reshape, sigmoid, silu, softmax, softplus, sqrt, stack, take_along_last_axis,
    tanh, tmean, transpose, tsum, verification_mode,
)
from .optim import ParameterSet, adam_step, glorot_uniform
from .distributions import (
    BernoulliLogit, Categorical, CategoricalVector, DiagonalUnitNormal,
    one_hot, sample_categorical,
)
from .gradcheck import check_gradients, finite_difference, max_relative_error
