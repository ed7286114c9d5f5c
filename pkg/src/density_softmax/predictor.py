"""Density-softmax predictor: frozen encoder, scaled likelihood, re-tuned head.

Training runs three steps: (1) standard ERM on encoder + classifier,
(2) density fit on the frozen encoder's train latents followed by likelihood
scaling, (3) re-optimization of the classifier alone against the
density-scaled objective. Inference multiplies each sample's logits by its
scaled likelihood s in (0, 1] before the softmax:

    probs = softmax(s * (z @ theta)),  z = encode(x),  s = scaled_likelihood(z)

so s -> 0 drives the prediction to uniform while s = 1 reproduces the plain
softmax bit for bit. Positive scaling never reorders logits, so the argmax
(and accuracy) match the plain softmax with the same weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import Tensor, softmax_cross_entropy
from .data import LabeledSet, require_fittable
from .density import FlowConfig, ScaledDensity, compute_scale, flow_fit, kde_fit
from .model import (Classifier, Encoder, EncoderConfig, TrainConfig,
                    TrainingDiverged, erm_train, init_model, minibatches)
from .ops import entropy, softmax
from .optim import OptimizerSpec


@dataclass(frozen=True)
class DensityConfig:
    """Which density estimator step 2 fits on the train latents."""

    kind: str = "kde"  # "kde" | "flow"
    bandwidth: float | None = None  # kde; None = Scott's rule
    flow: FlowConfig = FlowConfig()

    def __post_init__(self):
        if self.kind not in ("kde", "flow"):
            raise ValueError(f"unknown density kind {self.kind!r}")


@dataclass(frozen=True)
class ReoptConfig:
    epochs: int = 10
    batch_size: int = 128
    optimizer: OptimizerSpec = OptimizerSpec(kind="adam", lr=1e-4)
    reinit: bool = False  # start step 3 from fresh weights instead of step 1's
    seed: int = 0


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray
    scaled_likelihood: np.ndarray
    latent: np.ndarray


@dataclass
class DensitySoftmaxModel:
    encoder: Encoder
    classifier: Classifier
    density: ScaledDensity
    k: int

    def predict(self, x: np.ndarray) -> Prediction:
        """One encoder pass, one density pass, one matrix product per sample."""
        z = np.atleast_2d(np.asarray(x, dtype=np.float64))
        latent = self.encoder.encode(z)
        s = self.density.scaled_likelihood(latent)
        logits = self.classifier.logits(latent)
        probs = softmax(s[:, None] * logits)
        return Prediction(probs=probs, scaled_likelihood=s, latent=latent)

    def predict_probs(self, x: np.ndarray) -> np.ndarray:
        return self.predict(x).probs

    def param_count(self) -> int:
        return (self.encoder.param_count() + self.classifier.param_count()
                + self.density.param_count())


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class PipelineResult:
    model: DensitySoftmaxModel
    erm_classifier: Classifier  # step-1 head, shares the frozen encoder
    erm_loss_trace: list[float]
    density_loss_trace: list[float]
    reopt_loss_trace: list[float]

    def erm_probs(self, x: np.ndarray) -> np.ndarray:
        """Baseline plain-softmax prediction with the step-1 classifier."""
        z = self.model.encoder.encode(np.atleast_2d(x))
        return softmax(self.erm_classifier.logits(z))


def reoptimize_classifier(model: DensitySoftmaxModel, train: LabeledSet,
                          config: ReoptConfig) -> list[float]:
    """Step 3: refit the classifier against softmax(s * logits) targets.

    Latents and scaled likelihoods are precomputed once (encoder and density
    are frozen), so each step touches only the d_z x K head.
    """
    require_fittable(train)
    if config.reinit:
        rng = np.random.default_rng(config.seed)
        d_z = model.classifier.theta.data.shape[0]
        model.classifier.theta.data[...] = rng.uniform(
            -1.0 / np.sqrt(d_z), 1.0 / np.sqrt(d_z), model.classifier.theta.data.shape)
    z = model.encoder.encode(train.features)
    s = model.density.scaled_likelihood(z)
    theta = model.classifier.theta
    opt = config.optimizer.build()
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for epoch in range(config.epochs):
        losses = []
        for idx in minibatches(train.n, config.batch_size, rng):
            logits = Tensor(z[idx]) @ theta
            scaled = logits.mul_const(s[idx][:, None])
            loss = softmax_cross_entropy(scaled, train.labels[idx])
            if not np.isfinite(loss.data):
                raise TrainingDiverged(
                    f"non-finite re-optimization loss at epoch {epoch}")
            theta.zero_grad()
            loss.backward()
            opt.step([theta])
            losses.append(float(loss.data))
        trace.append(float(np.mean(losses)))
    return trace


def train_pipeline(train: LabeledSet, encoder_config: EncoderConfig,
                   train_config: TrainConfig, density_config: DensityConfig,
                   reopt_config: ReoptConfig, k: int = 2) -> PipelineResult:
    """Run all three training steps and keep the step-1 head as a baseline."""
    require_fittable(train)
    encoder, classifier = init_model(encoder_config, k, train_config.seed)
    try:
        erm_trace = erm_train(encoder, classifier, train, train_config)
    except Exception as exc:
        raise PipelineError("erm", exc) from exc
    erm_classifier = classifier.clone()

    try:
        train_z = encoder.encode(train.features)
        density_trace: list[float] = []
        if density_config.kind == "kde":
            fitted = kde_fit(train_z, density_config.bandwidth)
        else:
            fitted, density_trace = flow_fit(
                train_z, replace(density_config.flow, seed=train_config.seed))
        density = compute_scale(fitted, train_z)
    except Exception as exc:
        raise PipelineError("density", exc) from exc

    model = DensitySoftmaxModel(encoder=encoder, classifier=classifier,
                                density=density, k=k)
    try:
        reopt_trace = reoptimize_classifier(
            model, train, replace(reopt_config, seed=train_config.seed))
    except Exception as exc:
        raise PipelineError("reoptimize", exc) from exc

    return PipelineResult(model=model, erm_classifier=erm_classifier,
                          erm_loss_trace=erm_trace,
                          density_loss_trace=density_trace,
                          reopt_loss_trace=reopt_trace)


def predictive_summaries(probs: np.ndarray, scaled_likelihood: np.ndarray) -> dict:
    """Per-sample uncertainty summaries from a batch of predictions.

    Binary-only summaries (variance p(1-p), u(x) = 1 - 2|p - 0.5|, entropy in
    bits) require K = 2 and raise otherwise. Entropy in nats is always
    returned.
    """
    probs = np.atleast_2d(probs)
    out = {
        "max_prob": probs.max(axis=1),
        "entropy_nats": entropy(probs, "nats"),
        "scaled_likelihood": np.asarray(scaled_likelihood),
    }
    if probs.shape[1] == 2:
        p = probs[:, 1]
        out["variance"] = p * (1.0 - p)
        out["u"] = 1.0 - 2.0 * np.abs(p - 0.5)
        out["entropy_bits"] = entropy(probs, "bits")
    return out


def binary_summaries(probs: np.ndarray, scaled_likelihood: np.ndarray) -> dict:
    """predictive_summaries that insists on a binary classifier."""
    probs = np.atleast_2d(probs)
    if probs.shape[1] != 2:
        raise ValueError("binary summaries require exactly 2 classes")
    return predictive_summaries(probs, scaled_likelihood)
