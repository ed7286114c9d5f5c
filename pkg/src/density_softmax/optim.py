"""SGD-with-momentum and Adam parameter updates.

L2 here is a coupled gradient term (2*l2*w, the gradient of l2*sum(w^2));
the training loops instead put the penalty in the loss and leave it 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class SgdMomentum:
    lr: float
    momentum: float = 0.0
    nesterov: bool = False
    l2: float = 0.0
    _velocity: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def step(self, params: list[Tensor]) -> None:
        for p in params:
            if p.grad.shape != p.data.shape:
                raise ValueError("gradient/parameter shape mismatch")
            g = p.grad
            if self.l2:
                g = g + 2.0 * self.l2 * p.data
            v = self._velocity.get(id(p))
            if v is None:
                v = np.zeros_like(p.data)
                self._velocity[id(p)] = v
            v *= self.momentum
            v += g
            if self.nesterov:
                p.data -= self.lr * (g + self.momentum * v)
            else:
                p.data -= self.lr * v


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 0.0
    _m: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _v: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _t: int = 0

    def step(self, params: list[Tensor]) -> None:
        self._t += 1
        b1t = 1.0 - self.beta1**self._t
        b2t = 1.0 - self.beta2**self._t
        for p in params:
            if p.grad.shape != p.data.shape:
                raise ValueError("gradient/parameter shape mismatch")
            g = p.grad
            if self.l2:
                g = g + 2.0 * self.l2 * p.data
            m = self._m.setdefault(id(p), np.zeros_like(p.data))
            v = self._v.setdefault(id(p), np.zeros_like(p.data))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / b1t
            v_hat = v / b2t
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


Optimizer = SgdMomentum | Adam


@dataclass(frozen=True)
class OptimizerSpec:
    """Serializable optimizer choice; build() yields a fresh stateful instance."""

    kind: str = "adam"
    lr: float = 1e-4
    momentum: float = 0.9
    nesterov: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 0.0

    def build(self) -> Optimizer:
        if self.kind == "adam":
            return Adam(lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                        eps=self.eps, l2=self.l2)
        if self.kind == "sgd_momentum":
            return SgdMomentum(lr=self.lr, momentum=self.momentum,
                               nesterov=self.nesterov, l2=self.l2)
        raise ValueError(f"unknown optimizer kind {self.kind!r}")
