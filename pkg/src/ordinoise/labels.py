"""Ordinal label representations and the losses built on them.

Classes are 1-indexed at the API surface (labels live in 1..C); array
indices are 0-based internally. All logarithms are natural, and predicted
probabilities are clamped at ``PROB_FLOOR`` before any log or division so
saturated softmax outputs cannot produce infinities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    EmptyBatchError,
    InvalidClassError,
    InvalidParameterError,
    NumericError,
    ShapeError,
)

PROB_FLOOR = 1e-12

_SUM_TOL = 1e-9

LABEL_KINDS = ("hard", "soft", "smoothed")


def _as_distribution(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size < 2:
        raise ShapeError(f"expected a 1-D vector over >= 2 classes, got shape {probs.shape}")
    if np.any(probs < 0):
        raise InvalidParameterError("distribution entries must be nonnegative")
    total = float(probs.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise InvalidParameterError(f"distribution entries must sum to 1, got {total!r}")
    return probs


def _check_class(label: int, num_classes: int) -> int:
    if num_classes < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {num_classes}")
    label = int(label)
    if not 1 <= label <= num_classes:
        raise InvalidClassError(f"class {label} outside 1..{num_classes}")
    return label


@dataclass(frozen=True)
class LabelDistribution:
    """A probability vector over the C ordinal classes used as a teacher signal."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_distribution(self.probs))
        self.probs.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return self.probs.size


def hard_label(label: int, num_classes: int) -> LabelDistribution:
    """One-hot teacher vector at the attached class."""
    label = _check_class(label, num_classes)
    probs = np.zeros(num_classes)
    probs[label - 1] = 1.0
    return LabelDistribution(probs)


def soft_label(label: int, num_classes: int) -> LabelDistribution:
    """Relaxed teacher vector: mass decays as exp(-distance) from the attached class.

    Entry c is exp(-|c - label|) normalized over all classes, so the peak sits
    at the attached class and neighbors keep substantial probability.
    """
    label = _check_class(label, num_classes)
    distance = np.abs(np.arange(1, num_classes + 1) - label)
    weights = np.exp(-distance.astype(float))
    return LabelDistribution(weights / weights.sum())


def smoothed_label(label: int, num_classes: int, smoothing: float) -> LabelDistribution:
    """Uniform label smoothing: (1 - smoothing) on the class plus smoothing/C everywhere."""
    label = _check_class(label, num_classes)
    if not 0.0 <= smoothing < 1.0:
        raise InvalidParameterError(f"smoothing must be in [0, 1), got {smoothing}")
    probs = np.full(num_classes, smoothing / num_classes)
    probs[label - 1] += 1.0 - smoothing
    return LabelDistribution(probs)


def label_matrix(
    kind: str,
    labels: Sequence[int] | np.ndarray,
    num_classes: int,
    smoothing: float = 0.1,
) -> np.ndarray:
    """Stack teacher rows for a batch of attached class labels.

    Returns an (n, C) array whose i-th row is the hard / soft / smoothed
    distribution for ``labels[i]``.
    """
    if kind not in LABEL_KINDS:
        raise InvalidParameterError(f"unknown label kind {kind!r}, expected one of {LABEL_KINDS}")
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 1 or labels.max() > num_classes):
        raise InvalidClassError(f"labels outside 1..{num_classes}")
    if kind == "hard":
        rows = np.zeros((labels.size, num_classes))
        rows[np.arange(labels.size), labels - 1] = 1.0
        return rows
    if kind == "soft":
        distance = np.abs(np.arange(1, num_classes + 1)[None, :] - labels[:, None])
        rows = np.exp(-distance.astype(float))
        return rows / rows.sum(axis=1, keepdims=True)
    if not 0.0 <= smoothing < 1.0:
        raise InvalidParameterError(f"smoothing must be in [0, 1), got {smoothing}")
    rows = np.full((labels.size, num_classes), smoothing / num_classes)
    rows[np.arange(labels.size), labels - 1] += 1.0 - smoothing
    return rows


def temperature_softmax(logits, temperature: float) -> np.ndarray:
    """Softmax of logits/temperature, computed with max-subtraction.

    Temperatures below 1 sharpen the distribution; the argmax never moves.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1:
        raise ShapeError(f"logits must be 1-D, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NumericError("logits must be finite")
    if temperature <= 0:
        raise InvalidParameterError(f"temperature must be positive, got {temperature}")
    scaled = logits / temperature
    shifted = scaled - scaled.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def softmax_rows(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise temperature softmax for an (n, C) logit matrix."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2:
        raise ShapeError(f"expected an (n, C) logit matrix, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NumericError("logits must be finite")
    if temperature <= 0:
        raise InvalidParameterError(f"temperature must be positive, got {temperature}")
    scaled = logits / temperature
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def _probs_of(value) -> np.ndarray:
    if isinstance(value, LabelDistribution):
        return value.probs
    return np.asarray(value, dtype=float)


def cross_entropy(label, probs) -> float:
    """-sum_c l_c * ln(p_c) with the prediction clamped at PROB_FLOOR.

    With a hard label this reduces to the negative log-probability of the
    attached class. Always >= the entropy of the label distribution.
    """
    teacher = _probs_of(label)
    predicted = _probs_of(probs)
    if teacher.shape != predicted.shape:
        raise ShapeError(f"label shape {teacher.shape} != prediction shape {predicted.shape}")
    return float(-(teacher * np.log(np.maximum(predicted, PROB_FLOOR))).sum())


def entropy(dist) -> float:
    """Shannon entropy in nats, on the same clamped path as cross_entropy."""
    probs = _probs_of(dist)
    return float(-(probs * np.log(np.maximum(probs, PROB_FLOOR))).sum())


def per_sample_cross_entropy(label_rows: np.ndarray, prob_rows: np.ndarray) -> np.ndarray:
    """Vector of cross-entropies for stacked (n, C) teacher and prediction rows."""
    label_rows = np.asarray(label_rows, dtype=float)
    prob_rows = np.asarray(prob_rows, dtype=float)
    if label_rows.shape != prob_rows.shape:
        raise ShapeError(f"label rows {label_rows.shape} != prediction rows {prob_rows.shape}")
    return -(label_rows * np.log(np.maximum(prob_rows, PROB_FLOOR))).sum(axis=1)


def jeffrey_divergence(p, q) -> float:
    """Symmetrized KL divergence KL(p||q) + KL(q||p), entries clamped at PROB_FLOOR.

    Nonnegative, symmetric in its arguments, and zero exactly when they agree.
    """
    p = np.maximum(_probs_of(p), PROB_FLOOR)
    q = np.maximum(_probs_of(q), PROB_FLOOR)
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(((p - q) * (np.log(p) - np.log(q))).sum())


def per_sample_jeffrey(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """Row-wise Jeffrey divergence for stacked (n, C) probability matrices."""
    p = np.maximum(np.asarray(p_rows, dtype=float), PROB_FLOOR)
    q = np.maximum(np.asarray(q_rows, dtype=float), PROB_FLOOR)
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    return ((p - q) * (np.log(p) - np.log(q))).sum(axis=1)


class BatchLoss(NamedTuple):
    total: float
    mean: float


def batch_loss(
    kind: str,
    labels: Sequence[int] | np.ndarray,
    probs,
    smoothing: float = 0.1,
) -> BatchLoss:
    """Summed and mean cross-entropy over a mini-batch under the chosen label kind.

    ``probs`` is an (n, C) matrix or a sequence of length-C prediction vectors.
    """
    prob_rows = np.asarray([_probs_of(p) for p in probs], dtype=float) if not isinstance(
        probs, np.ndarray
    ) else np.asarray(probs, dtype=float)
    if prob_rows.size == 0:
        raise EmptyBatchError("batch_loss needs at least one sample")
    if prob_rows.ndim != 2:
        raise ShapeError(f"expected (n, C) predictions, got shape {prob_rows.shape}")
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (prob_rows.shape[0],):
        raise ShapeError(f"{labels.size} labels for {prob_rows.shape[0]} predictions")
    rows = label_matrix(kind, labels, prob_rows.shape[1], smoothing=smoothing)
    losses = per_sample_cross_entropy(rows, prob_rows)
    return BatchLoss(total=float(losses.sum()), mean=float(losses.mean()))
