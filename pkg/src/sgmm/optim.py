"""Adam with bias correction and classic additive L2 weight decay.

The decay enters the gradient (g + weight_decay * theta) before the moment
updates, not as a decoupled parameter shrink. Update rule per step t:

    m = b1*m + (1-b1)*g        m_hat = m / (1 - b1^t)
    v = b2*v + (1-b2)*g^2      v_hat = v / (1 - b2^t)
    theta -= lr * m_hat / (sqrt(v_hat) + eps)
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, ShapeError


class Adam:
    """Holds per-parameter moment buffers and the shared step counter."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-5,
                 weight_decay: float = 1e-7, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        if lr < 0 or weight_decay < 0:
            raise ConfigError("lr and weight_decay must be non-negative")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError("betas must be in [0, 1)")
        if epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        """One update over all parameters; missing grads count as zero."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            m, v = self.m[name], self.v[name]
            if m.shape != p.data.shape:
                raise ShapeError(
                    f"optimizer state for {name!r} has shape {m.shape}, "
                    f"parameter has {p.data.shape}")
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ShapeError(
                    f"gradient for {name!r} has shape {g.shape}, "
                    f"parameter has {p.data.shape}")
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            np.copyto(m, self.beta1 * m + (1.0 - self.beta1) * g)
            np.copyto(v, self.beta2 * v + (1.0 - self.beta2) * g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
