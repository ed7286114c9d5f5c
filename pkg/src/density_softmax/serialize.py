"""Versioned JSON model containers with exact float round-trip.

Weights are stored as nested lists; json emits full-precision reprs of
float64 values, so save -> load reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from .autodiff import Tensor
from .density import CouplingLayer, FlowModel, KdeModel, ScaledDensity
from .layers import Dense, DenseNet
from .model import Classifier, Encoder, EncoderConfig, Ensemble
from .predictor import DensitySoftmaxModel

CONTAINER_VERSION = 1


class ContainerError(ValueError):
    pass


def _dense_to_dict(layer: Dense) -> dict:
    return {
        "weight": layer.weight.data.tolist(),
        "bias": None if layer.bias is None else layer.bias.data.tolist(),
        "activation": layer.activation,
        "residual": layer.residual,
    }


def _dense_from_dict(d: dict) -> Dense:
    return Dense(
        weight=Tensor(np.array(d["weight"], dtype=np.float64)),
        bias=None if d["bias"] is None else Tensor(np.array(d["bias"], dtype=np.float64)),
        activation=d["activation"],
        residual=bool(d["residual"]),
    )


def _net_to_list(net: DenseNet) -> list:
    return [_dense_to_dict(layer) for layer in net.layers]


def _net_from_list(layers: list) -> DenseNet:
    return DenseNet([_dense_from_dict(d) for d in layers])


def _encoder_to_dict(encoder: Encoder) -> dict:
    cfg = encoder.config
    return {
        "config": {"input_dim": cfg.input_dim, "width": cfg.width,
                   "depth": cfg.depth, "latent_dim": cfg.latent_dim,
                   "activation": cfg.activation},
        "layers": _net_to_list(encoder.net),
    }


def _encoder_from_dict(d: dict) -> Encoder:
    return Encoder(EncoderConfig(**d["config"]), _net_from_list(d["layers"]))


def _density_to_dict(density: ScaledDensity) -> dict:
    inner = density.inner
    if isinstance(inner, KdeModel):
        body = {"kind": "kde", "support": inner.support.tolist(),
                "bandwidth": inner.bandwidth}
    elif isinstance(inner, FlowModel):
        body = {"kind": "flow", "dim": inner.dim,
                "layers": [{"mask": layer.mask.tolist(),
                            "s_net": _net_to_list(layer.s_net),
                            "t_net": _net_to_list(layer.t_net)}
                           for layer in inner.layers]}
    else:  # pragma: no cover
        raise ContainerError(f"unknown density type {type(inner).__name__}")
    body["max_train_log_density"] = density.max_train_log_density
    return body


def _density_from_dict(d: dict) -> ScaledDensity:
    if d["kind"] == "kde":
        inner: KdeModel | FlowModel = KdeModel(
            support=np.array(d["support"], dtype=np.float64),
            bandwidth=float(d["bandwidth"]))
    elif d["kind"] == "flow":
        layers = [CouplingLayer(mask=np.array(ld["mask"], dtype=np.float64),
                                s_net=_net_from_list(ld["s_net"]),
                                t_net=_net_from_list(ld["t_net"]))
                  for ld in d["layers"]]
        inner = FlowModel(int(d["dim"]), layers)
    else:
        raise ContainerError(f"unknown density kind {d['kind']!r}")
    return ScaledDensity(inner=inner,
                         max_train_log_density=float(d["max_train_log_density"]))


def density_softmax_container(model: DensitySoftmaxModel) -> dict:
    return {
        "version": CONTAINER_VERSION,
        "kind": "density_softmax",
        "k": model.k,
        "encoder": _encoder_to_dict(model.encoder),
        "classifier": {"theta": model.classifier.theta.data.tolist()},
        "density": _density_to_dict(model.density),
    }


def erm_container(encoder: Encoder, classifier: Classifier) -> dict:
    return {
        "version": CONTAINER_VERSION,
        "kind": "erm",
        "k": classifier.k,
        "encoder": _encoder_to_dict(encoder),
        "classifier": {"theta": classifier.theta.data.tolist()},
    }


def ensemble_container(ensemble: Ensemble) -> dict:
    return {
        "version": CONTAINER_VERSION,
        "kind": "ensemble",
        "members": [erm_container(enc, clf) for enc, clf in ensemble.members],
    }


def save_container(container: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(container, fh, sort_keys=True)
        fh.write("\n")


def load_container(path):
    """Load any container kind; returns the reconstructed model object."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "version" not in doc:
        raise ContainerError(f"{path}: missing version field")
    if doc["version"] != CONTAINER_VERSION:
        raise ContainerError(f"{path}: unsupported container version {doc['version']}")
    return _from_dict(doc)


def _from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "density_softmax":
        return DensitySoftmaxModel(
            encoder=_encoder_from_dict(doc["encoder"]),
            classifier=Classifier(Tensor(np.array(doc["classifier"]["theta"]))),
            density=_density_from_dict(doc["density"]),
            k=int(doc["k"]),
        )
    if kind == "erm":
        return ErmModel(
            encoder=_encoder_from_dict(doc["encoder"]),
            classifier=Classifier(Tensor(np.array(doc["classifier"]["theta"]))),
        )
    if kind == "ensemble":
        members = [_from_dict(m) for m in doc["members"]]
        return Ensemble([(m.encoder, m.classifier) for m in members])
    raise ContainerError(f"unknown container kind {kind!r}")


class ErmModel:
    """Deployable plain-softmax model (encoder + linear head)."""

    def __init__(self, encoder: Encoder, classifier: Classifier):
        self.encoder = encoder
        self.classifier = classifier
        self.k = classifier.k

    def predict_probs(self, x: np.ndarray) -> np.ndarray:
        from .ops import softmax

        z = self.encoder.encode(np.atleast_2d(x))
        return softmax(self.classifier.logits(z))

    def param_count(self) -> int:
        return self.encoder.param_count() + self.classifier.param_count()
