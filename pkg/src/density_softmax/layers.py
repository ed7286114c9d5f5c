"""Dense layers and small feed-forward stacks with optional residual links.

Each layer owns float64 parameter Tensors. ``forward`` runs plain numpy for
inference; ``forward_tape`` builds the autodiff graph with identical
arithmetic (tested for exact agreement).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor

ACTIVATIONS = ("relu", "tanh", "linear")


def _apply_activation(h, activation: str, tape: bool):
    if activation == "relu":
        return h.relu() if tape else np.maximum(h, 0.0)
    if activation == "tanh":
        return h.tanh() if tape else np.tanh(h)
    if activation == "linear":
        return h
    raise ValueError(f"unknown activation {activation!r}")


def fan_in_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Scaled-uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    bound = 1.0 / np.sqrt(rows)
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class Dense:
    """Affine layer y = act(x W + b), with b optional and an optional
    residual connection (requires equal input/output width)."""

    weight: Tensor
    bias: Tensor | None
    activation: str
    residual: bool = False

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        in_dim: int,
        out_dim: int,
        activation: str = "relu",
        bias: bool = True,
        residual: bool = False,
        zero: bool = False,
    ) -> "Dense":
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if residual and in_dim != out_dim:
            raise ValueError("residual layer needs equal input/output width")
        w = np.zeros((in_dim, out_dim)) if zero else fan_in_uniform(rng, in_dim, out_dim)
        b = Tensor(np.zeros(out_dim)) if bias else None
        return cls(weight=Tensor(w), bias=b, activation=activation, residual=residual)

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x @ self.weight.data
        if self.bias is not None:
            h = h + self.bias.data
        h = _apply_activation(h, self.activation, tape=False)
        return x + h if self.residual else h

    def forward_tape(self, x: Tensor) -> Tensor:
        h = x @ self.weight
        if self.bias is not None:
            h = h + self.bias
        h = _apply_activation(h, self.activation, tape=True)
        return x + h if self.residual else h

    def params(self) -> list[Tensor]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]


@dataclass
class DenseNet:
    """Ordered stack of Dense layers; consecutive widths must compose."""

    layers: list[Dense] = field(default_factory=list)

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.data.shape[1] != nxt.weight.data.shape[0]:
                raise ValueError(
                    f"layer widths do not compose: {prev.weight.data.shape} -> "
                    f"{nxt.weight.data.shape}"
                )

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_tape(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer.forward_tape(x)
        return x

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params())

    def weight_tensors(self) -> list[Tensor]:
        """Weight matrices only (biases excluded), for l2 penalties."""
        return [layer.weight for layer in self.layers]


def l2_penalty(weights: list[Tensor], coefficient: float) -> Tensor | None:
    """L2 regularizer coefficient * sum(w^2) as a graph node, or None if off."""
    if coefficient == 0.0 or not weights:
        return None
    total = weights[0].square().sum()
    for w in weights[1:]:
        total = total + w.square().sum()
    return total.scale(coefficient)
