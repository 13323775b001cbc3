"""Evaluation metrics, per-epoch records, and cross-fold aggregation.

This module is also the only sanctioned route to clean labels: trainers see
attached labels only, and the helpers here (``true_labels``, ``clean_flag_map``)
exist so that evaluation and label-precision accounting can reach the ground
truth without it leaking into the training path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import OrdinalDataset
from .errors import (
    EmptyTraceError,
    InvalidClassError,
    InvalidParameterError,
    ShapeError,
    UndefinedMetricError,
)


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise ShapeError("need at least one prediction")
    return pred, truth


def accuracy(pred, truth) -> float:
    """Fraction of exactly matching labels."""
    pred, truth = _paired(pred, truth)
    return float((pred == truth).mean())


def mae(pred, truth) -> float:
    """Mean absolute difference between predicted and true class indices."""
    pred, truth = _paired(pred, truth)
    return float(np.abs(pred - truth).mean())


def macro_f1(pred, truth, num_classes: int) -> float:
    """Unweighted mean of per-class F1.

    A class with zero-denominator precision or recall contributes 0 for that
    quantity, and a class absent from both predictions and truth contributes
    an F1 of 0 — conservative, but deterministic on tiny inputs.
    """
    pred, truth = _paired(pred, truth)
    for name, arr in (("pred", pred), ("truth", truth)):
        if arr.min() < 1 or arr.max() > num_classes:
            raise InvalidClassError(f"{name} labels outside 1..{num_classes}")
    scores = []
    for label in range(1, num_classes + 1):
        tp = float(np.sum((pred == label) & (truth == label)))
        fp = float(np.sum((pred == label) & (truth != label)))
        fn = float(np.sum((pred != label) & (truth == label)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        scores.append(f1)
    return float(np.mean(scores))


def true_labels(dataset: OrdinalDataset, ids) -> np.ndarray:
    """Clean labels for the given ids (evaluation only)."""
    return dataset._clean_labels[dataset.positions(ids)]


def clean_flag_map(dataset: OrdinalDataset) -> dict[int, bool]:
    """id -> (attached label equals clean label), for label-precision accounting."""
    flags = dataset._noisy_labels == dataset._clean_labels
    return {int(i): bool(f) for i, f in zip(dataset.ids, flags)}


def label_precision(selected_ids, clean_flags: Mapping[int, bool]) -> float:
    """Fraction of selected samples whose attached label is actually correct."""
    selected = list(selected_ids)
    if not selected:
        raise UndefinedMetricError("label precision of an empty selection is undefined")
    return sum(bool(clean_flags[int(i)]) for i in selected) / len(selected)


@dataclass(frozen=True)
class EpochRecord:
    """One row of the training log; the *_mean fields average the two networks."""

    epoch: int
    train_loss: float
    acc_net1: float
    acc_net2: float
    acc_mean: float
    mae_net1: float
    mae_net2: float
    mae_mean: float
    mf1_net1: float
    mf1_net2: float
    mf1_mean: float
    label_precision_net1: float | None = None
    label_precision_net2: float | None = None
    label_precision: float | None = None
    selected_count: int | None = None
    val_acc_mean: float | None = None

    def __post_init__(self):
        for name in ("acc_net1", "acc_net2", "acc_mean", "mf1_net1", "mf1_net2", "mf1_mean"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f"{name}={value} outside [0, 1]")
        for name in ("mae_net1", "mae_net2", "mae_mean"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be nonnegative")
        for name in ("label_precision_net1", "label_precision_net2", "label_precision"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f"{name}={value} outside [0, 1]")


_SKIPPED_FIELDS = ("epoch",)


def last_k_average(trace, k: int) -> dict[str, float]:
    """Mean of each numeric metric over the final min(k, length) epoch records.

    Accepts a RunTrace or a plain sequence of EpochRecord. Fields that are
    None anywhere in the window (e.g. label precision for non-selecting
    methods) are omitted from the result.
    """
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    records: Sequence[EpochRecord] = getattr(trace, "records", trace)
    if len(records) == 0:
        raise EmptyTraceError("cannot average an empty trace")
    window = records[-min(k, len(records)):]
    out: dict[str, float] = {}
    for field in dataclasses.fields(EpochRecord):
        if field.name in _SKIPPED_FIELDS:
            continue
        values = [getattr(r, field.name) for r in window]
        if any(v is None for v in values):
            continue
        out[field.name] = float(np.mean(values))
    return out


@dataclass(frozen=True)
class SummaryRow:
    """Per-metric mean and population standard deviation across folds or seeds."""

    means: dict[str, float]
    stds: dict[str, float]
    fold_count: int


def aggregate_folds(summaries: Sequence[Mapping[str, float]]) -> SummaryRow:
    """Combine per-fold last-k summaries; std is the population standard deviation."""
    if len(summaries) == 0:
        raise EmptyTraceError("need at least one fold summary")
    keys = set(summaries[0])
    for s in summaries[1:]:
        keys &= set(s)
    means = {}
    stds = {}
    for key in sorted(keys):
        values = np.asarray([s[key] for s in summaries], dtype=float)
        means[key] = float(values.mean())
        stds[key] = float(values.std())
    return SummaryRow(means=means, stds=stds, fold_count=len(summaries))
