"""First-order optimizers that step a list of Parameters and zero their grads."""
from __future__ import annotations

import numpy as np


class Optimizer:
    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr
        self.t = 0

    def _update(self, i, p):
        raise NotImplementedError

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            self._update(i, p)
            p.zero_grad()

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


class SGD(Optimizer):
    def __init__(self, params, lr: float = 1e-3, momentum: float = 0.0):
        super().__init__(params, lr)
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p):
        v = self.velocity[i]
        v *= self.momentum
        v += p.grad
        p.value -= self.lr * v


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p):
        g = p.grad
        self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
        self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
        mhat = self.m[i] / (1 - self.beta1**self.t)
        vhat = self.v[i] / (1 - self.beta2**self.t)
        p.value -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class RMSprop(Optimizer):
    def __init__(self, params, lr: float = 1e-3, alpha: float = 0.99, eps: float = 1e-8):
        super().__init__(params, lr)
        self.alpha, self.eps = alpha, eps
        self.sq = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p):
        g = p.grad
        self.sq[i] = self.alpha * self.sq[i] + (1 - self.alpha) * g * g
        p.value -= self.lr * g / (np.sqrt(self.sq[i]) + self.eps)


def make_optimizer(kind: str, params, lr: float = 1e-3, **kw) -> Optimizer:
    kinds = {"sgd": SGD, "adam": Adam, "rmsprop": RMSprop}
    try:
        cls = kinds[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}") from None
    return cls(params, lr=lr, **kw)


def optimizer_step(optimizer: Optimizer, parameters=None):
    if parameters is not None and list(parameters) != optimizer.params:
        raise ValueError("optimizer was built for a different parameter list")
    optimizer.step()
