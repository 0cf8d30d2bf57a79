"""Autodiff tensor engine: ops, models, optimizer, gradient checking."""

from .gradcheck import OP_CHECKS, grad_check, run_op_suite
from .nn import (
    CnnBaseline,
    CnnBaselineSpec,
    Module,
    UNet,
    UNetSpec,
    build_from_state,
    cnn_baseline_forward,
    unet_forward,
)
from .optim import AdamConfig, Parameter, adam_step, zero_grads
from .tensor import (
    BCE_EPS,
    Tensor,
    add,
    bce_loss,
    concat_channels,
    conv2d,
    linear,
    maxpool2d,
    mse_loss,
    no_grad,
    relu,
    reshape,
    sigmoid,
    tensor_sum,
    upsample_nearest2x,
    weighted_sum,
)

__all__ = [
    "Tensor",
    "Parameter",
    "AdamConfig",
    "Module",
    "UNet",
    "UNetSpec",
    "CnnBaseline",
    "CnnBaselineSpec",
    "BCE_EPS",
    "OP_CHECKS",
    "add",
    "adam_step",
    "bce_loss",
    "build_from_state",
    "cnn_baseline_forward",
    "concat_channels",
    "conv2d",
    "grad_check",
    "linear",
    "maxpool2d",
    "mse_loss",
    "no_grad",
    "relu",
    "reshape",
    "run_op_suite",
    "sigmoid",
    "tensor_sum",
    "unet_forward",
    "upsample_nearest2x",
    "weighted_sum",
    "zero_grads",
]
