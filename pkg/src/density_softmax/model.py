"""Residual feed-forward encoder, bias-free linear classifier, ERM training.

The encoder is an input projection followed by `depth` residual blocks
y = x + relu(Wx + b), so width must equal the latent dimension. The
classifier is a single d_z x K matrix with no bias; logits are z @ theta.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, softmax_cross_entropy
from .data import LabeledSet, require_fittable
from .layers import Dense, DenseNet, fan_in_uniform, l2_penalty
from .ops import softmax
from .optim import OptimizerSpec


class TrainingDiverged(RuntimeError):
    """Raised when a training loss goes non-finite (learning rate too high)."""


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int = 2
    width: int = 128
    depth: int = 12
    latent_dim: int = 128
    activation: str = "relu"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.width != self.latent_dim:
            raise ValueError("width must equal latent_dim for residual blocks")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    lr_decay_epochs: tuple[int, ...] = ()
    lr_decay_ratio: float = 1.0
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def lr_at(self, epoch: int) -> float:
        decays = sum(1 for e in self.lr_decay_epochs if epoch >= e)
        return self.optimizer.lr * (self.lr_decay_ratio**decays)


class Encoder:
    """Input projection plus residual relu blocks; tracks rows encoded so
    tests can assert the single-forward-pass contract."""

    def __init__(self, config: EncoderConfig, net: DenseNet):
        self.config = config
        self.net = net
        self.eval_count = 0  # rows pushed through encode()

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.config.input_dim:
            raise ValueError(f"expected {self.config.input_dim} input columns, got {x.shape[1]}")
        self.eval_count += x.shape[0]
        z = self.net.forward(x)
        return z[0] if squeeze else z

    def encode_tape(self, x: np.ndarray) -> Tensor:
        self.eval_count += x.shape[0]
        return self.net.forward_tape(Tensor(x))

    def params(self) -> list[Tensor]:
        return self.net.params()

    def param_count(self) -> int:
        return self.net.param_count()


class Classifier:
    """Bias-free linear head: logits = z @ theta, theta is d_z x K."""

    def __init__(self, theta: Tensor):
        self.theta = theta

    @property
    def k(self) -> int:
        return self.theta.data.shape[1]

    def logits(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.theta.data.shape[0]:
            raise ValueError(
                f"latent dim {z.shape[-1]} does not match classifier rows "
                f"{self.theta.data.shape[0]}"
            )
        return z @ self.theta.data

    def params(self) -> list[Tensor]:
        return [self.theta]

    def param_count(self) -> int:
        return self.theta.data.size

    def clone(self) -> "Classifier":
        return Classifier(Tensor(self.theta.data.copy()))


def init_model(config: EncoderConfig, k: int, seed: int) -> tuple[Encoder, Classifier]:
    """Fan-in scaled-uniform init, deterministic per seed."""
    if k < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    layers = [Dense.init(rng, config.input_dim, config.width, config.activation)]
    for _ in range(config.depth):
        layers.append(Dense.init(rng, config.width, config.width, config.activation,
                                 residual=True))
    encoder = Encoder(config, DenseNet(layers))
    theta = Tensor(fan_in_uniform(rng, config.latent_dim, k))
    return encoder, Classifier(theta)


def param_count(encoder: Encoder, classifier: Classifier, *extras) -> int:
    """Total scalar parameters across the model and any extra components
    exposing param_count()."""
    total = encoder.param_count() + classifier.param_count()
    for extra in extras:
        total += extra.param_count()
    return total


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches; the order is a pure function of the rng state."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def erm_train(encoder: Encoder, classifier: Classifier, train: LabeledSet,
              config: TrainConfig) -> list[float]:
    """Minimize mean cross-entropy of softmax(classifier(encoder(x))).

    Returns the per-epoch mean loss trace. An optional l2 coefficient adds
    l2 * sum(w^2) over all weight matrices to the loss.
    """
    require_fittable(train)
    params = encoder.params() + classifier.params()
    weights = encoder.net.weight_tensors() + [classifier.theta]
    opt = config.optimizer.build()
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for epoch in range(config.epochs):
        opt.lr = config.lr_at(epoch)
        epoch_losses = []
        for idx in minibatches(train.n, config.batch_size, rng):
            z = encoder.encode_tape(train.features[idx])
            logits = z @ classifier.theta
            loss = softmax_cross_entropy(logits, train.labels[idx])
            penalty = l2_penalty(weights, config.l2)
            if penalty is not None:
                loss = loss + penalty
            if not np.isfinite(loss.data):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}; lower the learning rate")
            for p in params:
                p.zero_grad()
            loss.backward()
            opt.step(params)
            epoch_losses.append(float(loss.data))
        trace.append(float(np.mean(epoch_losses)))
    return trace


def predict_probs(encoder: Encoder, classifier: Classifier, x: np.ndarray) -> np.ndarray:
    """Plain-softmax predictive probabilities (the pre-density baseline)."""
    return softmax(classifier.logits(encoder.encode(np.atleast_2d(x))))


@dataclass
class Ensemble:
    """Deep ensemble: members differ only by seed; the prediction is the
    arithmetic mean of member probability vectors."""

    members: list[tuple[Encoder, Classifier]]

    def predict_probs(self, x: np.ndarray) -> np.ndarray:
        probs = [predict_probs(enc, clf, x) for enc, clf in self.members]
        return np.mean(probs, axis=0)

    def param_count(self) -> int:
        return sum(param_count(enc, clf) for enc, clf in self.members)


def ensemble_train(m: int, encoder_config: EncoderConfig, k: int,
                   train: LabeledSet, train_config: TrainConfig) -> Ensemble:
    if m < 2:
        raise ValueError("an ensemble needs at least 2 members")
    members = []
    for i in range(m):
        enc, clf = init_model(encoder_config, k, train_config.seed + i)
        erm_train(enc, clf, train, replace(train_config, seed=train_config.seed + i))
        members.append((enc, clf))
    return Ensemble(members)
