"""Synthetic ordinal datasets, CSV ingestion/export, and cross-validation splits.

The dataset keeps two label columns: the original clean labels and the
(possibly corrupted) attached labels that training sees. Trainers only ever
receive a :class:`TrainView`, which carries the attached labels; clean labels
are reserved for evaluation and are surfaced through the metrics module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CsvParseError,
    InvalidClassError,
    InvalidParameterError,
    ShapeError,
    StratificationError,
)
from .noise import NoiseReport, TransitionMatrix, inject_noise

CSV_ID_COLUMN = "id"
CSV_LABEL_COLUMN = "label"


@dataclass(frozen=True)
class Sample:
    """One record: feature vector, clean label, and the attached (noisy) label."""

    id: int
    features: np.ndarray
    clean_label: int
    noisy_label: int


@dataclass(frozen=True)
class TrainView:
    """Trainer-facing slice of a dataset: features plus attached labels only."""

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.ids.size


class OrdinalDataset:
    """Columnar store of samples with ordinal labels in 1..C."""

    def __init__(
        self,
        ids: np.ndarray,
        features: np.ndarray,
        clean_labels: np.ndarray,
        noisy_labels: np.ndarray | None = None,
        num_classes: int | None = None,
    ):
        ids = np.asarray(ids, dtype=int)
        features = np.asarray(features, dtype=float)
        clean = np.asarray(clean_labels, dtype=int)
        noisy = clean.copy() if noisy_labels is None else np.asarray(noisy_labels, dtype=int)
        if features.ndim != 2:
            raise ShapeError(f"features must be (N, d), got shape {features.shape}")
        n = features.shape[0]
        if ids.shape != (n,) or clean.shape != (n,) or noisy.shape != (n,):
            raise ShapeError("ids, features, and labels must have matching lengths")
        if n == 0:
            raise ShapeError("dataset cannot be empty")
        if np.unique(ids).size != n:
            raise InvalidParameterError("sample ids must be unique")
        inferred = int(max(clean.max(), noisy.max()))
        self._num_classes = int(num_classes) if num_classes is not None else inferred
        for name, col in (("clean", clean), ("noisy", noisy)):
            if col.min() < 1 or col.max() > self._num_classes:
                raise InvalidClassError(f"{name} labels outside 1..{self._num_classes}")
        self._ids = ids
        self._features = features
        self._clean_labels = clean
        self._noisy_labels = noisy
        self._pos = {int(i): p for p, i in enumerate(ids)}
        for arr in (self._ids, self._features, self._clean_labels, self._noisy_labels):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self._ids.size

    def __getitem__(self, index: int) -> Sample:
        return Sample(
            id=int(self._ids[index]),
            features=self._features[index],
            clean_label=int(self._clean_labels[index]),
            noisy_label=int(self._noisy_labels[index]),
        )

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def noisy_labels(self) -> np.ndarray:
        """The attached (possibly corrupted) labels, in dataset order."""
        return self._noisy_labels

    @property
    def num_classes(self) -> int:
        return self._num_classes

    @property
    def dim(self) -> int:
        return self._features.shape[1]

    def positions(self, ids: Sequence[int] | np.ndarray) -> np.ndarray:
        try:
            return np.asarray([self._pos[int(i)] for i in ids], dtype=int)
        except KeyError as exc:
            raise InvalidParameterError(f"unknown sample id {exc.args[0]}") from None

    def train_view(self, ids: Sequence[int] | np.ndarray) -> TrainView:
        """Features and attached labels for the given ids; no clean labels."""
        pos = self.positions(ids)
        return TrainView(
            ids=self._ids[pos], features=self._features[pos], labels=self._noisy_labels[pos]
        )

    def class_priors(self) -> np.ndarray:
        """Empirical clean-label distribution, for noise-rate calibration."""
        counts = np.bincount(self._clean_labels - 1, minlength=self._num_classes)
        return counts / counts.sum()

    def with_noise(
        self,
        matrix: TransitionMatrix,
        seed: int,
        ids: Sequence[int] | np.ndarray | None = None,
    ) -> tuple["OrdinalDataset", NoiseReport]:
        """Return a copy whose attached labels, on ``ids``, are resampled from the matrix.

        Samples outside ``ids`` keep their current attached labels, so noise can
        be confined to the train/validation portion while the test split stays clean.
        """
        if matrix.num_classes != self._num_classes:
            raise ShapeError(
                f"matrix has {matrix.num_classes} classes, dataset has {self._num_classes}"
            )
        pos = np.arange(len(self)) if ids is None else self.positions(ids)
        noisy_subset, report = inject_noise(self._clean_labels[pos], matrix, seed)
        noisy = self._noisy_labels.copy()
        noisy[pos] = noisy_subset
        clone = OrdinalDataset(
            self._ids, self._features, self._clean_labels, noisy, self._num_classes
        )
        return clone, report

    def save_csv(self, path) -> None:
        """Write the dataset with clean labels in the documented CSV layout."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                [CSV_ID_COLUMN, CSV_LABEL_COLUMN]
                + [f"f{j}" for j in range(1, self.dim + 1)]
            )
            for i in range(len(self)):
                writer.writerow(
                    [int(self._ids[i]), int(self._clean_labels[i])]
                    + [repr(float(v)) for v in self._features[i]]
                )

    def save_noise_sidecar(self, path) -> None:
        """Write the (id, clean_label, noisy_label) companion file."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["id", "clean_label", "noisy_label"])
            for i in range(len(self)):
                writer.writerow(
                    [int(self._ids[i]), int(self._clean_labels[i]), int(self._noisy_labels[i])]
                )


def generate_ordinal_blobs(
    num_classes: int,
    dim: int,
    counts: Sequence[int],
    spacing: float,
    feature_scale: float,
    seed: int,
) -> OrdinalDataset:
    """Gaussian blobs strung along the first feature axis, one per class.

    Class c is centered at (c * spacing, 0, ..., 0) with isotropic scale
    ``feature_scale``, so neighboring classes overlap and confusion follows
    the ordinal geometry. Attached labels start out equal to clean labels.
    """
    if num_classes < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {num_classes}")
    if dim < 1:
        raise InvalidParameterError(f"feature dimension must be >= 1, got {dim}")
    if len(counts) != num_classes:
        raise InvalidParameterError(f"expected {num_classes} class counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise InvalidParameterError("every class count must be >= 1")
    if spacing <= 0 or feature_scale <= 0:
        raise InvalidParameterError("spacing and feature_scale must be positive")
    rng = np.random.default_rng(seed)
    chunks = []
    labels = []
    for label, count in enumerate(counts, start=1):
        block = rng.normal(0.0, feature_scale, size=(count, dim))
        block[:, 0] += label * spacing
        chunks.append(block)
        labels.append(np.full(count, label, dtype=int))
    features = np.vstack(chunks)
    clean = np.concatenate(labels)
    ids = np.arange(features.shape[0])
    return OrdinalDataset(ids, features, clean, num_classes=num_classes)


def load_csv(path) -> OrdinalDataset:
    """Parse a dataset CSV with header ``id,label,f1..fd``.

    Labels must be integers >= 1 and the observed classes must form a
    contiguous 1..C range.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file") from None
        expected_prefix = [CSV_ID_COLUMN, CSV_LABEL_COLUMN]
        if header[:2] != expected_prefix or len(header) < 3:
            raise CsvParseError(f"{path}: header must be id,label,f1..fd, got {header}")
        dim = len(header) - 2
        if header[2:] != [f"f{j}" for j in range(1, dim + 1)]:
            raise CsvParseError(f"{path}: feature columns must be named f1..f{dim}")
        ids, labels, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 2:
                raise CsvParseError(
                    f"{path}: line {line_no}: expected {dim + 2} fields, got {len(row)}"
                )
            try:
                ids.append(int(row[0]))
                label = int(row[1])
                rows.append([float(v) for v in row[2:]])
            except ValueError:
                raise CsvParseError(f"{path}: line {line_no}: malformed value") from None
            if label < 1:
                raise InvalidClassError(f"{path}: line {line_no}: label {label} below 1")
            labels.append(label)
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    labels_arr = np.asarray(labels, dtype=int)
    present = np.unique(labels_arr)
    num_classes = int(present.max())
    if present.size != num_classes:
        missing = sorted(set(range(1, num_classes + 1)) - set(present.tolist()))
        raise InvalidClassError(f"{path}: class set not contiguous, missing {missing}")
    return OrdinalDataset(
        np.asarray(ids), np.asarray(rows, dtype=float), labels_arr, num_classes=num_classes
    )


@dataclass(frozen=True)
class FoldSplit:
    """Disjoint id lists for one cross-validation fold."""

    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray


@dataclass(frozen=True)
class SplitPlan:
    folds: tuple[FoldSplit, ...]

    def __len__(self) -> int:
        return len(self.folds)


def make_folds(dataset: OrdinalDataset, k: int, seed: int) -> SplitPlan:
    """Stratified rotating folds: per class, shuffle and cut into k chunks.

    Fold f uses chunk f as test, chunk f+1 (mod k) as validation, and the rest
    for training, so every id is tested exactly once. With the default k=5
    this yields the 60/20/20 train/validation/test proportions.
    """
    if k < 2:
        raise InvalidParameterError(f"need at least 2 folds, got {k}")
    if len(dataset) < k:
        raise StratificationError(f"{len(dataset)} samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    clean = dataset._clean_labels
    per_class_chunks: list[list[np.ndarray]] = []
    for label in range(1, dataset.num_classes + 1):
        class_ids = dataset.ids[clean == label]
        if class_ids.size < k:
            raise StratificationError(
                f"class {label} has {class_ids.size} samples, fewer than {k} folds"
            )
        per_class_chunks.append(np.array_split(rng.permutation(class_ids), k))
    folds = []
    for f in range(k):
        test = np.sort(np.concatenate([chunks[f] for chunks in per_class_chunks]))
        val = np.sort(np.concatenate([chunks[(f + 1) % k] for chunks in per_class_chunks]))
        train_parts = [
            chunks[j] for chunks in per_class_chunks for j in range(k) if j not in (f, (f + 1) % k)
        ]
        train = np.sort(np.concatenate(train_parts)) if train_parts else np.array([], dtype=int)
        folds.append(FoldSplit(train_ids=train, val_ids=val, test_ids=test))
    return SplitPlan(folds=tuple(folds))
