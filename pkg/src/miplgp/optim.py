"""Adam with a cosine-annealed learning rate, on a flat parameter vector."""

from __future__ import annotations

import math

import numpy as np


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """Cosine annealing from base_lr at step 0 toward 0 at step == total_steps."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


class AdamOptimizer:
    """Adam state over a fixed-size parameter vector; returns update deltas.

    step() consumes the gradient and the current learning rate and returns
    the additive update -lr * m_hat / (sqrt(v_hat) + eps). Under a constant
    gradient the step magnitude approaches lr, regardless of gradient scale.
    """

    def __init__(
        self,
        num_params: int,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if num_params < 0:
            raise ValueError("num_params must be >= 0")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(num_params)
        self.v = np.zeros(num_params)
        self.t = 0

    def step(self, grads: np.ndarray, lr: float) -> np.ndarray:
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != self.m.shape:
            raise ValueError(f"gradient shape {grads.shape} != {self.m.shape}")
        if not np.isfinite(grads).all():
            raise ValueError("non-finite gradient")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return -lr * m_hat / (np.sqrt(v_hat) + self.eps)
