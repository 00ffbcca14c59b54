"""
numkit - deterministic dense numeric kernel.

Float64 matrices with tape-based reverse-mode gradients, the layer
primitives the recommenders and adversaries are built from, Adam/SGD
updates and a finite-difference gradient checker.
"""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .layers import MLP, BinaryClassifier, classifier_sizes
from .ops import (
    Mode,
    add,
    affine_forward,
    batch_norm,
    concat_cols,
    constant,
    dropout,
    gather_rows,
    leaky_relu,
    log_sigmoid,
    matmul,
    mean_all,
    mul,
    rowwise_dot,
    scale,
    sigmoid,
    sigmoid_bce,
    softplus,
    spectral_normalize,
    spectral_sigma,
    square_sum,
    sub,
    sum_all,
)
from .optim import Optimizer, OptimizerState, adam_state, adam_step, sgd_state, sgd_step
from .params import LayerParams, NormState, SpectralState
from .rng import derive_rng, derive_seed
from .tape import Tape, Tensor, active_tape

__all__ = [
    "BinaryClassifier",
    "GradCheckReport",
    "LayerParams",
    "MLP",
    "Mode",
    "NormState",
    "Optimizer",
    "OptimizerState",
    "SpectralState",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_state",
    "adam_step",
    "add",
    "affine_forward",
    "batch_norm",
    "classifier_sizes",
    "concat_cols",
    "constant",
    "derive_rng",
    "derive_seed",
    "dropout",
    "gather_rows",
    "grad_check",
    "leaky_relu",
    "log_sigmoid",
    "matmul",
    "mean_all",
    "mul",
    "relative_error",
    "rowwise_dot",
    "scale",
    "sgd_state",
    "sgd_step",
    "sigmoid",
    "sigmoid_bce",
    "softplus",
    "spectral_normalize",
    "spectral_sigma",
    "square_sum",
    "sub",
    "sum_all",
]
