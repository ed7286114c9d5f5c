"""Plain-numpy inference ops: softmax, cross-entropy, entropy helpers."""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max-subtracted exponentials)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0 or logits.shape[-1] < 2:
        raise ValueError("softmax needs at least 2 logits")
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax input must be finite")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-log p[label] for a single probability vector, floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ValueError("cross_entropy expects a single probability vector")
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def entropy(probs: np.ndarray, base: str = "nats") -> np.ndarray:
    """Shannon entropy along the last axis. base is 'nats' or 'bits'."""
    probs = np.asarray(probs, dtype=np.float64)
    p = np.clip(probs, PROB_FLOOR, 1.0)
    h = -(p * np.log(p)).sum(axis=-1)
    if base == "bits":
        return h / np.log(2.0)
    if base != "nats":
        raise ValueError(f"unknown entropy base {base!r}")
    return h


def logsumexp(a: np.ndarray, axis=None):
    a = np.asarray(a, dtype=np.float64)
    m = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - m).sum(axis=axis, keepdims=True)) + m
    return float(out.item()) if axis is None else np.squeeze(out, axis=axis)
