"""Small-loss clean-sample selection and its keep-rate schedule.

Three selector flavors share the same core: score every sample in the batch,
keep the max(1, floor(R * n)) lowest-scoring ones. Scores always come from
temperature-sharpened probabilities and never involve clean labels — the
batch the selectors see carries attached labels only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import labels as lb
from . import mlp
from .dataset import TrainView
from .errors import EmptyBatchError, InvalidParameterError

SELECTION_LABELS = ("hard", "soft")


@dataclass(frozen=True)
class Schedule:
    """Keep-rate warm-down: from 1 toward 1 - noise_rate over warmup_epochs."""

    noise_rate: float
    warmup_epochs: int
    total_epochs: int

    def __post_init__(self):
        if not 0.0 <= self.noise_rate < 1.0:
            raise InvalidParameterError(f"noise rate must be in [0, 1), got {self.noise_rate}")
        if not 1 <= self.warmup_epochs <= self.total_epochs:
            raise InvalidParameterError(
                f"need 1 <= warmup ({self.warmup_epochs}) <= total ({self.total_epochs})"
            )


def keep_rate(schedule: Schedule, epoch: int) -> float:
    """R(epoch) = 1 - min(epoch * noise_rate / warmup, noise_rate); epoch is 1-based."""
    if epoch < 1:
        raise InvalidParameterError(f"epoch index must be >= 1, got {epoch}")
    ramp = epoch * schedule.noise_rate / schedule.warmup_epochs
    return 1.0 - min(ramp, schedule.noise_rate)


def selected_count(rate: float, batch_size: int) -> int:
    """max(1, floor(rate * batch_size)), with a tiny nudge against float artifacts like 0.7*10."""
    if not 0.0 < rate <= 1.0:
        raise InvalidParameterError(f"keep rate must be in (0, 1], got {rate}")
    return max(1, math.floor(rate * batch_size + 1e-9))


def select_small_loss(losses, rate: float) -> np.ndarray:
    """Indices of the k smallest losses, ties broken by lower index, returned ascending."""
    losses = np.asarray(losses, dtype=float)
    if losses.size == 0:
        raise EmptyBatchError("cannot select from an empty batch")
    k = selected_count(rate, losses.size)
    order = np.argsort(losses, kind="stable")
    return np.sort(order[:k])


@dataclass
class SelectionOutcome:
    """What one selector call produced for one batch.

    ``clean_flags`` is filled afterwards by the metrics accounting and plays
    no role in training decisions.
    """

    ids: np.ndarray
    indices: np.ndarray
    losses: np.ndarray
    keep_rate: float
    clean_flags: np.ndarray | None = None


def _selection_probs(params, features: np.ndarray, temperature: float) -> np.ndarray:
    return lb.softmax_rows(mlp.forward(params, features), temperature)


def _selection_label_rows(batch: TrainView, num_classes: int, selection_label: str) -> np.ndarray:
    if selection_label not in SELECTION_LABELS:
        raise InvalidParameterError(
            f"selection label must be one of {SELECTION_LABELS}, got {selection_label!r}"
        )
    return lb.label_matrix(selection_label, batch.labels, num_classes)


def _outcome(batch: TrainView, scores: np.ndarray, rate: float) -> SelectionOutcome:
    picked = select_small_loss(scores, rate)
    return SelectionOutcome(
        ids=batch.ids[picked], indices=picked, losses=scores, keep_rate=rate
    )


def coteaching_select(
    params_1,
    params_2,
    batch: TrainView,
    temperature: float,
    rate: float,
    selection_label: str = "hard",
) -> tuple[SelectionOutcome, SelectionOutcome]:
    """Each network picks its own small-loss set from its sharpened cross-entropy.

    The caller is expected to cross the picks over: network 1 trains on the
    set chosen by network 2 and vice versa.
    """
    if len(batch) == 0:
        raise EmptyBatchError("cannot select from an empty batch")
    num_classes = params_1.dims[2]
    rows = _selection_label_rows(batch, num_classes, selection_label)
    losses_1 = lb.per_sample_cross_entropy(
        rows, _selection_probs(params_1, batch.features, temperature)
    )
    losses_2 = lb.per_sample_cross_entropy(
        rows, _selection_probs(params_2, batch.features, temperature)
    )
    return _outcome(batch, losses_1, rate), _outcome(batch, losses_2, rate)


def jocor_select(
    params_1,
    params_2,
    batch: TrainView,
    temperature: float,
    rate: float,
    reg_weight: float,
    selection_label: str = "hard",
    include_divergence: bool = True,
) -> SelectionOutcome:
    """One shared small-loss set scored by both cross-entropies plus the divergence.

    ``include_divergence`` drops the reg_weight * J term from the score, for
    probing whether the coupled score helps selection.
    """
    if len(batch) == 0:
        raise EmptyBatchError("cannot select from an empty batch")
    if reg_weight < 0:
        raise InvalidParameterError(f"reg_weight must be nonnegative, got {reg_weight}")
    num_classes = params_1.dims[2]
    rows = _selection_label_rows(batch, num_classes, selection_label)
    probs_1 = _selection_probs(params_1, batch.features, temperature)
    probs_2 = _selection_probs(params_2, batch.features, temperature)
    scores = lb.per_sample_cross_entropy(rows, probs_1) + lb.per_sample_cross_entropy(
        rows, probs_2
    )
    if include_divergence:
        scores = scores + reg_weight * lb.per_sample_jeffrey(probs_1, probs_2)
    return _outcome(batch, scores, rate)


def codis_select(
    params_1,
    params_2,
    batch: TrainView,
    temperature: float,
    rate: float,
    reg_weight: float,
    selection_label: str = "hard",
) -> tuple[SelectionOutcome, SelectionOutcome]:
    """Discrepancy-adjusted picks: low loss AND high cross-network disagreement win.

    Per-network score is its own cross-entropy minus reg_weight times the
    Jeffrey divergence between the two prediction rows; cross-update as in
    coteaching_select.
    """
    if len(batch) == 0:
        raise EmptyBatchError("cannot select from an empty batch")
    if reg_weight < 0:
        raise InvalidParameterError(f"reg_weight must be nonnegative, got {reg_weight}")
    num_classes = params_1.dims[2]
    rows = _selection_label_rows(batch, num_classes, selection_label)
    probs_1 = _selection_probs(params_1, batch.features, temperature)
    probs_2 = _selection_probs(params_2, batch.features, temperature)
    disagreement = lb.per_sample_jeffrey(probs_1, probs_2)
    scores_1 = lb.per_sample_cross_entropy(rows, probs_1) - reg_weight * disagreement
    scores_2 = lb.per_sample_cross_entropy(rows, probs_2) - reg_weight * disagreement
    return _outcome(batch, scores_1, rate), _outcome(batch, scores_2, rate)
