"""Latent-space density estimation and likelihood scaling.

Two estimators share the same interface (``log_density`` over rows):

* :class:`KdeModel` — Gaussian kernel density with a scalar bandwidth.
* :class:`FlowModel` — affine coupling flow with exact log-likelihood via
  the change-of-variables formula: log p(z) = log N(t; 0, I) + log|det J|
  where t is the stacked coupling transform of z.

After fitting, :func:`compute_scale` records the maximum train-point
log-density (a streaming max over batches); scaled likelihoods are then
exp(log p(z) - max), which lives in (0, 1] with the densest train point
mapping to exactly 1. Values that underflow are floored at the smallest
positive normal float so the interval stays open at 0; test points denser
than any train point clamp to 1.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .layers import Dense, DenseNet, l2_penalty
from .model import TrainingDiverged, minibatches
from .ops import logsumexp
from .optim import OptimizerSpec

LIKELIHOOD_FLOOR = sys.float_info.min  # smallest positive normal float64

LOG_2PI = math.log(2.0 * math.pi)


# -- kernel density estimation ----------------------------------------------


@dataclass(frozen=True)
class KdeModel:
    """Gaussian KDE: log-mean of isotropic Gaussian kernels at the support."""

    support: np.ndarray  # n x d latent matrix
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "support", np.asarray(self.support, dtype=np.float64))
        if self.support.ndim != 2 or self.support.shape[0] == 0:
            raise ValueError("KDE support must be a non-empty matrix")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def log_density(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        n, d = self.support.shape
        # squared distances via the expansion ||z-s||^2 = ||z||^2 - 2 z.s + ||s||^2
        sq = (
            (z * z).sum(axis=1)[:, None]
            - 2.0 * z @ self.support.T
            + (self.support * self.support).sum(axis=1)[None, :]
        )
        np.maximum(sq, 0.0, out=sq)
        log_kernels = -sq / (2.0 * self.bandwidth**2)
        norm = math.log(n) + d * math.log(self.bandwidth) + 0.5 * d * LOG_2PI
        return logsumexp(log_kernels, axis=1) - norm

    def param_count(self) -> int:
        return self.support.size + 1  # stored support plus the bandwidth


def scott_bandwidth(z: np.ndarray) -> float:
    """Scott's factor n^(-1/(d+4)) times the mean per-dimension std."""
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    sigma = float(z.std(axis=0).mean())
    if sigma == 0.0:
        sigma = 1.0
    return float(n ** (-1.0 / (d + 4))) * sigma


def kde_fit(z: np.ndarray, bandwidth: float | None = None) -> KdeModel:
    z = np.asarray(z, dtype=np.float64)
    if bandwidth is None:
        bandwidth = scott_bandwidth(z)
    return KdeModel(support=z.copy(), bandwidth=float(bandwidth))


# -- coupling flow ------------------------------------------------------------


@dataclass
class CouplingLayer:
    """Affine coupling: coordinates with mask 1 pass through and drive the
    scale/shift subnets; the complement is transformed.

    forward:  t = m*z + (1-m) * (z * exp(s) + b)   with s = S(m*z), b = T(m*z)
    inverse:  z = m*t + (1-m) * (t - b) * exp(-s)
    log|det| = sum of s over transformed coordinates.
    """

    mask: np.ndarray
    s_net: DenseNet
    t_net: DenseNet

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        if not ((self.mask == 0) | (self.mask == 1)).all():
            raise ValueError("mask must be binary")
        if self.mask.sum() in (0, self.mask.size):
            raise ValueError("mask needs at least one 0 and one 1")

    def _subnet_outputs(self, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        comp = 1.0 - self.mask
        s = self.s_net.forward(h) * comp
        b = self.t_net.forward(h) * comp
        return s, b

    def forward(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = z * self.mask
        s, b = self._subnet_outputs(h)
        t = h + (1.0 - self.mask) * (z * np.exp(s) + b)
        return t, s.sum(axis=1)

    def inverse(self, t: np.ndarray) -> np.ndarray:
        h = t * self.mask
        s, b = self._subnet_outputs(h)
        return h + (1.0 - self.mask) * (t - b) * np.exp(-s)

    def forward_tape(self, z: Tensor) -> tuple[Tensor, Tensor]:
        comp = 1.0 - self.mask
        h = z.mul_const(self.mask)
        s = self.s_net.forward_tape(h).mul_const(comp)
        b = self.t_net.forward_tape(h).mul_const(comp)
        t = h + (z * s.exp() + b).mul_const(comp)
        return t, s.sum()

    def params(self) -> list[Tensor]:
        return self.s_net.params() + self.t_net.params()


def _coupling_subnet(rng: np.random.Generator, dim: int, hidden_units: int,
                     hidden_layers: int, final_activation: str) -> DenseNet:
    # Zero-initialized output layer makes the freshly built flow the identity.
    layers = [Dense.init(rng, dim, hidden_units, "relu")]
    for _ in range(hidden_layers - 1):
        layers.append(Dense.init(rng, hidden_units, hidden_units, "relu"))
    layers.append(Dense.init(rng, hidden_units, dim, final_activation, zero=True))
    return DenseNet(layers)


@dataclass(frozen=True)
class FlowConfig:
    coupling_layers: int = 4
    hidden_units: int = 16
    hidden_layers: int = 4
    epochs: int = 3000
    batch_size: int = 128
    l2: float = 0.01
    optimizer: OptimizerSpec = OptimizerSpec(kind="adam", lr=1e-4)
    seed: int = 0


class FlowModel:
    """Stack of coupling layers with alternating half masks over a standard
    normal base; provides exact log-density, forward, and inverse maps."""

    def __init__(self, dim: int, layers: list[CouplingLayer]):
        if dim < 2:
            raise ValueError("flow needs dim >= 2")
        self.dim = dim
        self.layers = layers

    @classmethod
    def build(cls, dim: int, config: FlowConfig) -> "FlowModel":
        rng = np.random.default_rng(config.seed)
        half = np.zeros(dim)
        half[: dim // 2] = 1.0
        layers = []
        for i in range(config.coupling_layers):
            mask = half if i % 2 == 0 else 1.0 - half
            layers.append(CouplingLayer(
                mask=mask.copy(),
                s_net=_coupling_subnet(rng, dim, config.hidden_units,
                                       config.hidden_layers, "tanh"),
                t_net=_coupling_subnet(rng, dim, config.hidden_units,
                                       config.hidden_layers, "linear"),
            ))
        return cls(dim, layers)

    def forward(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        log_det = np.zeros(z.shape[0])
        for i, layer in enumerate(self.layers):
            z, ld = layer.forward(z)
            if not np.all(np.isfinite(z)):
                raise FloatingPointError(f"non-finite values after coupling layer {i}")
            log_det += ld
        return z, log_det

    def inverse(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=np.float64))
        for i, layer in enumerate(reversed(self.layers)):
            t = layer.inverse(t)
            if not np.all(np.isfinite(t)):
                raise FloatingPointError(f"non-finite values inverting coupling layer {i}")
        return t

    def log_density(self, z: np.ndarray) -> np.ndarray:
        t, log_det = self.forward(z)
        base = -0.5 * (t * t).sum(axis=1) - 0.5 * self.dim * LOG_2PI
        return base + log_det

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params())

    def weight_tensors(self) -> list[Tensor]:
        return [w for layer in self.layers
                for w in layer.s_net.weight_tensors() + layer.t_net.weight_tensors()]

    def nll_loss(self, batch: np.ndarray, l2: float) -> Tensor:
        """Mean negative log-likelihood of the batch as a graph node."""
        n, d = batch.shape
        z = Tensor(batch)
        s_total = None
        for layer in self.layers:
            z, s_sum = layer.forward_tape(z)
            s_total = s_sum if s_total is None else s_total + s_sum
        # mean over the batch of [0.5*||t||^2 - log_det] plus the base constant
        loss = (z.square().sum().scale(0.5) - s_total).scale(1.0 / n)
        loss = loss.add_const(0.5 * d * LOG_2PI)
        penalty = l2_penalty(self.weight_tensors(), l2)
        if penalty is not None:
            loss = loss + penalty
        return loss


def flow_fit(z: np.ndarray, config: FlowConfig) -> tuple[FlowModel, list[float]]:
    """Fit a coupling flow to latent rows by minimizing mean NLL.

    Returns the model and the per-epoch loss trace.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n < config.batch_size:
        raise ValueError(f"need at least batch_size={config.batch_size} rows, got {n}")
    flow = FlowModel.build(z.shape[1], config)
    params = flow.params()
    opt = config.optimizer.build()
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for epoch in range(config.epochs):
        losses = []
        for idx in minibatches(n, config.batch_size, rng):
            loss = flow.nll_loss(z[idx], config.l2)
            if not np.isfinite(loss.data):
                raise TrainingDiverged(
                    f"non-finite flow loss at epoch {epoch}; lower the learning rate")
            for p in params:
                p.zero_grad()
            loss.backward()
            opt.step(params)
            losses.append(float(loss.data))
        trace.append(float(np.mean(losses)))
    return flow, trace


# -- likelihood scaling -------------------------------------------------------


@dataclass(frozen=True)
class ScaledDensity:
    """A fitted density plus the max train log-density used for scaling."""

    inner: KdeModel | FlowModel
    max_train_log_density: float

    def log_density(self, z: np.ndarray) -> np.ndarray:
        return self.inner.log_density(z)

    def scaled_likelihood(self, z: np.ndarray) -> np.ndarray:
        """exp(log p(z) - max train log p), clamped into [floor, 1]."""
        logp = self.inner.log_density(z)
        with np.errstate(under="ignore"):
            s = np.exp(np.minimum(logp - self.max_train_log_density, 0.0))
        return np.clip(s, LIKELIHOOD_FLOOR, 1.0)

    def param_count(self) -> int:
        return self.inner.param_count() + 1  # plus the scale constant


def compute_scale(density: KdeModel | FlowModel, train_z: np.ndarray,
                  batch_size: int = 128) -> ScaledDensity:
    """Streaming max of train log-densities over batches."""
    train_z = np.asarray(train_z, dtype=np.float64)
    if train_z.ndim != 2 or train_z.shape[0] == 0:
        raise ValueError("train_z must be a non-empty matrix")
    best = -np.inf
    for start in range(0, train_z.shape[0], batch_size):
        batch_max = float(density.log_density(train_z[start:start + batch_size]).max())
        if batch_max > best:
            best = batch_max
    return ScaledDensity(inner=density, max_train_log_density=best)
