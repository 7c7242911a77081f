"""Parameter update rules."""

from __future__ import annotations

import numpy as np

from .layers import Parameter


class SGD:
    def __init__(self, lr: float = 0.01):
        self.lr = lr

    def step(self, params: list[Parameter]) -> None:
        for p in params:
            p.value -= (self.lr * p.grad).astype(p.value.dtype)


class Adam:
    """Bias-corrected first/second-moment update (the usual defaults)."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self, params: list[Parameter]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p in params:
            if p.m is None:
                p.m = np.zeros_like(p.value)
                p.v = np.zeros_like(p.value)
            p.m[...] = self.beta1 * p.m + (1.0 - self.beta1) * p.grad
            p.v[...] = self.beta2 * p.v + (1.0 - self.beta2) * p.grad**2
            m_hat = p.m / b1t
            v_hat = p.v / b2t
            p.value -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.value.dtype)


def make_optimizer(kind: str, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8):
    if kind == "adam":
        return Adam(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    if kind == "sgd":
        return SGD(lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")
