"""Noise-robust training for ordinal classification.

Core pieces: soft/hard/smoothed label representations (:mod:`ordinoise.labels`),
label-noise transition matrices and injection (:mod:`ordinoise.noise`),
synthetic ordinal datasets and splits (:mod:`ordinoise.dataset`), a small MLP
with analytic gradients (:mod:`ordinoise.mlp`), small-loss sample selection
(:mod:`ordinoise.selection`), the training loops (:mod:`ordinoise.trainers`),
evaluation metrics (:mod:`ordinoise.metrics`), and the config-driven
experiment harness (:mod:`ordinoise.harness`, CLI in :mod:`ordinoise.cli`).
"""

from .dataset import (
    FoldSplit,
    OrdinalDataset,
    Sample,
    SplitPlan,
    TrainView,
    generate_ordinal_blobs,
    load_csv,
    make_folds,
)
from .labels import (
    LabelDistribution,
    batch_loss,
    cross_entropy,
    hard_label,
    jeffrey_divergence,
    smoothed_label,
    soft_label,
    temperature_softmax,
)
from .metrics import EpochRecord, SummaryRow, accuracy, label_precision, macro_f1, mae
from .noise import (
    NoiseReport,
    TransitionMatrix,
    inject_noise,
    quasi_gaussian_matrix,
    realized_noise_rate,
    truncated_gaussian_matrix,
)
from .selection import Schedule, keep_rate, select_small_loss
from .trainers import MethodConfig, RunTrace, run_ablation_grid, train

__version__ = "0.1.0"

__all__ = [
    "EpochRecord",
    "FoldSplit",
    "LabelDistribution",
    "MethodConfig",
    "NoiseReport",
    "OrdinalDataset",
    "RunTrace",
    "Sample",
    "Schedule",
    "SplitPlan",
    "SummaryRow",
    "TrainView",
    "TransitionMatrix",
    "accuracy",
    "batch_loss",
    "cross_entropy",
    "generate_ordinal_blobs",
    "hard_label",
    "inject_noise",
    "jeffrey_divergence",
    "keep_rate",
    "label_precision",
    "load_csv",
    "macro_f1",
    "mae",
    "make_folds",
    "quasi_gaussian_matrix",
    "realized_noise_rate",
    "run_ablation_grid",
    "select_small_loss",
    "smoothed_label",
    "soft_label",
    "temperature_softmax",
    "train",
    "truncated_gaussian_matrix",
]
