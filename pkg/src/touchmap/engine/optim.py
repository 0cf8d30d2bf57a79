"""Trainable parameters and the Adam update rule."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .tensor import Tensor

__all__ = ["Parameter", "AdamConfig", "adam_step", "zero_grads"]


class Parameter(Tensor):
    """Named leaf tensor with Adam moment buffers.

    Moments are lazily allocated on the first optimizer step so freshly
    loaded checkpoints start from clean optimizer state.
    """

    __slots__ = ("name", "adam_m", "adam_v", "step_count")

    def __init__(self, data, name: str):
        super().__init__(np.asarray(data, dtype=np.float32), requires_grad=True)
        self.name = name
        self.adam_m: np.ndarray | None = None
        self.adam_v: np.ndarray | None = None
        self.step_count = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape})"


class AdamConfig:
    """Hyperparameters for :func:`adam_step`."""

    __slots__ = ("lr", "beta1", "beta2", "eps")

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(params: list[Parameter], config: AdamConfig) -> None:
    """Apply one bias-corrected Adam update in place.

    Parameters with no accumulated gradient are skipped (their step counter
    does not advance).  Non-finite gradients abort the run rather than
    silently poisoning the weights.
    """
    for p in params:
        if p.grad is None:
            continue
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
        if p.adam_m is None:
            p.adam_m = np.zeros_like(p.data)
            p.adam_v = np.zeros_like(p.data)
        p.step_count += 1
        p.adam_m = config.beta1 * p.adam_m + (1.0 - config.beta1) * g
        p.adam_v = config.beta2 * p.adam_v + (1.0 - config.beta2) * (g * g)
        m_hat = p.adam_m / (1.0 - config.beta1 ** p.step_count)
        v_hat = p.adam_v / (1.0 - config.beta2 ** p.step_count)
        p.data -= (config.lr * m_hat / (np.sqrt(v_hat) + config.eps)).astype(p.data.dtype)


def zero_grads(params: list[Parameter]) -> None:
    """Drop accumulated gradients before the next batch."""
    for p in params:
        p.grad = None
