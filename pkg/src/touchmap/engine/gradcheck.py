"""Finite-difference validation of every differentiable op.

`grad_check` compares reverse-mode gradients against double-precision
central differences of a scalar projection.  `OP_CHECKS` maps each op name
to a factory that builds random-but-seeded problem instances, so the same
suite backs both the unit tests and the `gradcheck` CLI subcommand.

Instances deliberately avoid non-differentiable neighbourhoods: ReLU inputs
stay away from 0, BCE predictions away from the clamp, and pooling inputs
have well-separated window values, so central differences are valid.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import DomainError
from . import tensor as T
from .nn import CnnBaseline, CnnBaselineSpec, UNet, UNetSpec
from .tensor import Tensor

__all__ = ["grad_check", "OP_CHECKS", "run_op_suite"]

# Factory signature: rng -> (scalar_fn, list of differentiable input arrays).
CheckFactory = Callable[[np.random.Generator], tuple[Callable[..., Tensor], list[np.ndarray]]]


def grad_check(
    fn: Callable[..., Tensor],
    inputs: list[np.ndarray],
    eps: float = 1e-6,
    grad_bias: float = 0.0,
) -> float:
    """Return the worst relative error between analytic and numeric grads.

    `fn` must map Tensor arguments to a scalar Tensor.  Inputs are promoted
    to float64; the relative error uses max(|analytic|, |numeric|, 1) as the
    denominator so near-zero gradients are compared absolutely.  `grad_bias`
    deliberately corrupts one analytic gradient element -- a negative
    control proving the harness can fail.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in inputs]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*tensors)
    if out.data.size != 1:
        raise DomainError("grad_check requires a scalar-valued function")
    out.backward()

    worst = 0.0
    for i, base in enumerate(arrays):
        analytic = tensors[i].grad
        if analytic is None:
            analytic = np.zeros_like(base)
        if grad_bias and i == 0:
            analytic = analytic.copy()
            analytic.reshape(-1)[0] += grad_bias
        numeric = np.empty_like(base)
        flat = base.reshape(-1)
        num_flat = numeric.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            with T.no_grad():
                hi = fn(*(Tensor(a) for a in arrays)).item()
            flat[j] = orig - eps
            with T.no_grad():
                lo = fn(*(Tensor(a) for a in arrays)).item()
            flat[j] = orig
            num_flat[j] = (hi - lo) / (2.0 * eps)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst


def _projection(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    # Random linear functional turning any op output into a scalar.
    return rng.uniform(-1.0, 1.0, size=shape)


def _away_from_zero(rng: np.random.Generator, shape, low=0.1, high=1.5) -> np.ndarray:
    mag = rng.uniform(low, high, size=shape)
    return mag * rng.choice([-1.0, 1.0], size=shape)


def _distinct_values(rng: np.random.Generator, shape) -> np.ndarray:
    # Pairwise gaps >= 2/(n-1) keep pooling argmaxes stable under FD nudges.
    n = int(np.prod(shape))
    return rng.permutation(np.linspace(-1.0, 1.0, n)).reshape(shape)


def _check_relu(rng):
    x = _away_from_zero(rng, (3, 5))
    w = _projection(rng, x.shape)
    return (lambda t: T.weighted_sum(T.relu(t), w)), [x]


def _check_sigmoid(rng):
    x = rng.uniform(-4.0, 4.0, size=(4, 6))
    w = _projection(rng, x.shape)
    return (lambda t: T.weighted_sum(T.sigmoid(t), w)), [x]


def _check_conv2d(rng):
    b, c, o = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    k = int(rng.choice([1, 3, 5]))
    h, w = rng.integers(3, 8), rng.integers(3, 8)
    x = rng.uniform(-1, 1, size=(b, c, h, w))
    wt = rng.uniform(-1, 1, size=(o, c, k, k))
    bias = rng.uniform(-1, 1, size=(o,))
    proj = _projection(rng, (b, o, h, w))
    return (lambda t, u, v: T.weighted_sum(T.conv2d(t, u, v), proj)), [x, wt, bias]


def _check_maxpool2d(rng):
    b, c = rng.integers(1, 3), rng.integers(1, 3)
    h, w = 2 * rng.integers(1, 4), 2 * rng.integers(1, 4)
    x = _distinct_values(rng, (b, c, h, w))
    proj = _projection(rng, (b, c, h // 2, w // 2))
    return (lambda t: T.weighted_sum(T.maxpool2d(t), proj)), [x]


def _check_upsample(rng):
    b, c, h, w = rng.integers(1, 3), rng.integers(1, 3), rng.integers(1, 5), rng.integers(1, 5)
    x = rng.uniform(-1, 1, size=(b, c, h, w))
    proj = _projection(rng, (b, c, 2 * h, 2 * w))
    return (lambda t: T.weighted_sum(T.upsample_nearest2x(t), proj)), [x]


def _check_concat(rng):
    b, h, w = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    ca, cb = rng.integers(1, 4), rng.integers(1, 4)
    a = rng.uniform(-1, 1, size=(b, ca, h, w))
    bb = rng.uniform(-1, 1, size=(b, cb, h, w))
    proj = _projection(rng, (b, ca + cb, h, w))
    return (lambda t, u: T.weighted_sum(T.concat_channels(t, u), proj)), [a, bb]


def _check_linear(rng):
    n, f, o = rng.integers(1, 5), rng.integers(1, 7), rng.integers(1, 5)
    x = rng.uniform(-1, 1, size=(n, f))
    wt = rng.uniform(-1, 1, size=(o, f))
    bias = rng.uniform(-1, 1, size=(o,))
    proj = _projection(rng, (n, o))
    return (lambda t, u, v: T.weighted_sum(T.linear(t, u, v), proj)), [x, wt, bias]


def _check_bce(rng):
    shape = (3, 4)
    pred = rng.uniform(0.05, 0.95, size=shape)
    target = rng.uniform(0.0, 1.0, size=shape)
    return (lambda p: T.bce_loss(p, Tensor(target.astype(np.float64)))), [pred]


def _check_mse(rng):
    shape = (3, 4)
    pred = rng.uniform(-1, 1, size=shape)
    target = rng.uniform(-1, 1, size=shape)
    return (lambda p: T.mse_loss(p, Tensor(target.astype(np.float64)))), [pred]


def _unet_scalar(rng):
    # End-to-end check through a miniature network: perturb the input image,
    # read the gradient through every op class at once.
    spec = UNetSpec(in_channels=1, base_channels=2, depth=2, out_resolution=8)
    model = UNet(spec, rng)
    for p in model.parameters():
        p.data = p.data.astype(np.float64)
    x = rng.uniform(-1, 1, size=(1, 1, 8, 8))
    proj = _projection(rng, (1, 1, 8, 8))
    return (lambda t: T.weighted_sum(model(t), proj)), [x]


def _cnn_scalar(rng):
    spec = CnnBaselineSpec(in_channels=1, stage_channels=(2, 3), hidden_features=5, input_hw=8)
    model = CnnBaseline(spec, rng)
    for p in model.parameters():
        p.data = p.data.astype(np.float64)
    x = rng.uniform(-1, 1, size=(2, 1, 8, 8))
    proj = _projection(rng, (2, 3))
    return (lambda t: T.weighted_sum(model(t), proj)), [x]


OP_CHECKS: dict[str, CheckFactory] = {
    "relu": _check_relu,
    "sigmoid": _check_sigmoid,
    "conv2d": _check_conv2d,
    "maxpool2d": _check_maxpool2d,
    "upsample_nearest2x": _check_upsample,
    "concat_channels": _check_concat,
    "linear": _check_linear,
    "bce_loss": _check_bce,
    "mse_loss": _check_mse,
    "unet_forward": _unet_scalar,
    "cnn_baseline_forward": _cnn_scalar,
}


def run_op_suite(
    op_name: str,
    instances: int = 20,
    seed: int = 0,
    eps: float = 1e-6,
    grad_bias: float = 0.0,
) -> float:
    """Worst relative error for `instances` seeded instances of one op."""
    if op_name not in OP_CHECKS:
        raise DomainError(f"unknown op {op_name!r}; known: {sorted(OP_CHECKS)}")
    factory = OP_CHECKS[op_name]
    worst = 0.0
    for i in range(instances):
        rng = np.random.default_rng([seed, i])
        fn, inputs = factory(rng)
        worst = max(worst, grad_check(fn, inputs, eps=eps, grad_bias=grad_bias))
    return worst
