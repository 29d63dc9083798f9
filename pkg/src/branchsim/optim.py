"""Minimal gradient-descent optimizers shared by prior training and inference."""

from __future__ import annotations

import numpy as np


class Adam:
    """Adam with bias correction; ``step`` returns the updated parameters."""

    def __init__(self, lr: float = 0.05, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    """Plain gradient descent; used where momentum must be disabled."""

    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return params - self.lr * grad


def make_optimizer(name: str, lr: float, beta1: float = 0.9, beta2: float = 0.999):
    if name == "adam":
        return Adam(lr=lr, beta1=beta1, beta2=beta2)
    if name == "sgd":
        return Sgd(lr=lr)
    raise ValueError(f"unknown optimizer {name!r} (expected 'adam' or 'sgd')")
