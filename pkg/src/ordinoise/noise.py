"""Label-noise transition matrices, corruption injection, and rate calibration.

Both matrix families concentrate flips on nearby classes, mimicking the way
ordinal annotation mistakes cluster around the true grade. The ``strength``
parameter scales all off-diagonal mass; the diagonal completes each row to 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InfeasibleMatrixError,
    InvalidClassError,
    InvalidParameterError,
    ShapeError,
)

NOISE_FAMILIES = ("quasi_gaussian", "truncated_gaussian")

_ROW_TOL = 1e-9


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix of corruption probabilities Pr(label j | true class i)."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ShapeError(f"transition matrix must be square, got shape {entries.shape}")
        if entries.shape[0] < 2:
            raise InvalidParameterError("need at least 2 classes")
        if np.any(entries < 0) or np.any(entries > 1):
            raise InvalidParameterError("entries must lie in [0, 1]")
        row_sums = entries.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > _ROW_TOL):
            bad = int(np.argmax(np.abs(row_sums - 1.0)))
            raise InvalidParameterError(
                f"row for class {bad + 1} sums to {row_sums[bad]!r}, expected 1"
            )
        object.__setattr__(self, "entries", entries)
        entries.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return self.entries.shape[0]

    def row(self, label: int) -> np.ndarray:
        """Corruption distribution for true class ``label`` (1-indexed)."""
        if not 1 <= label <= self.num_classes:
            raise InvalidClassError(f"class {label} outside 1..{self.num_classes}")
        return self.entries[label - 1]

    def to_csv(self) -> str:
        """Render as CSV: a header row of the class indices, then one row per class."""
        buf = io.StringIO()
        buf.write(",".join(str(c) for c in range(1, self.num_classes + 1)) + "\n")
        for row in self.entries:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_csv())


@dataclass(frozen=True)
class NoiseReport:
    """Bookkeeping from one injection pass.

    ``requested_rate`` is the flip rate the matrix implies under the empirical
    class priors of the labels that were corrupted; ``realized_flip_fraction``
    is the fraction that actually flipped.
    """

    requested_rate: float
    realized_flip_fraction: float
    flips_per_class: np.ndarray
    sample_count: int


def quasi_gaussian_matrix(num_classes: int, strength: float) -> TransitionMatrix:
    """Off-diagonal mass strength/|i-j|: flips decay with ordinal distance."""
    if num_classes < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {num_classes}")
    if strength < 0:
        raise InvalidParameterError(f"strength must be nonnegative, got {strength}")
    idx = np.arange(num_classes)
    gaps = np.abs(idx[:, None] - idx[None, :]).astype(float)
    with np.errstate(divide="ignore"):
        entries = np.where(gaps > 0, strength / np.where(gaps > 0, gaps, 1.0), 0.0)
    off_sums = entries.sum(axis=1)
    if np.any(off_sums > 1.0 + _ROW_TOL):
        bad = int(np.argmax(off_sums))
        raise InfeasibleMatrixError(
            f"strength {strength} leaves class {bad + 1} with off-diagonal mass "
            f"{off_sums[bad]:.6f} > 1"
        )
    entries[idx, idx] = np.maximum(1.0 - off_sums, 0.0)
    return TransitionMatrix(entries)


def truncated_gaussian_matrix(num_classes: int, strength: float) -> TransitionMatrix:
    """Flips only to adjacent classes, each with probability ``strength``.

    Interior classes carry 2*strength off-diagonal mass, so strength must not
    exceed 0.5.
    """
    if num_classes < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {num_classes}")
    if strength < 0:
        raise InvalidParameterError(f"strength must be nonnegative, got {strength}")
    if strength > 0.5:
        raise InfeasibleMatrixError(
            f"strength {strength} > 0.5 makes interior rows exceed unit mass"
        )
    idx = np.arange(num_classes)
    gaps = np.abs(idx[:, None] - idx[None, :])
    entries = np.where(gaps == 1, float(strength), 0.0)
    entries[idx, idx] = 1.0 - entries.sum(axis=1)
    return TransitionMatrix(entries)


def build_matrix(family: str, num_classes: int, strength: float) -> TransitionMatrix:
    if family == "quasi_gaussian":
        return quasi_gaussian_matrix(num_classes, strength)
    if family == "truncated_gaussian":
        return truncated_gaussian_matrix(num_classes, strength)
    raise InvalidParameterError(f"unknown noise family {family!r}, expected one of {NOISE_FAMILIES}")


def realized_noise_rate(matrix: TransitionMatrix, priors: Sequence[float] | np.ndarray) -> float:
    """Expected flip fraction 1 - sum_i priors_i * P_ii under the given class priors."""
    priors = np.asarray(priors, dtype=float)
    if priors.shape != (matrix.num_classes,):
        raise ShapeError(
            f"priors shape {priors.shape} does not match {matrix.num_classes} classes"
        )
    if np.any(priors < 0) or abs(float(priors.sum()) - 1.0) > 1e-6:
        raise InvalidParameterError("priors must be a probability vector")
    return float(1.0 - priors @ np.diag(matrix.entries))


def calibrate_strength(
    family: str, num_classes: int, priors: Sequence[float] | np.ndarray, target_rate: float
) -> float:
    """Solve for the strength whose expected flip rate equals ``target_rate``.

    The expected rate is linear in strength for both families, so the answer
    is target_rate divided by the per-unit-strength rate. The returned value
    is validated by building the matrix (raises if infeasible).
    """
    if not 0.0 <= target_rate < 1.0:
        raise InvalidParameterError(f"target rate must be in [0, 1), got {target_rate}")
    priors = np.asarray(priors, dtype=float)
    idx = np.arange(num_classes)
    gaps = np.abs(idx[:, None] - idx[None, :]).astype(float)
    if family == "quasi_gaussian":
        unit_off = np.where(gaps > 0, 1.0 / np.where(gaps > 0, gaps, 1.0), 0.0).sum(axis=1)
    elif family == "truncated_gaussian":
        unit_off = (gaps == 1).sum(axis=1).astype(float)
    else:
        raise InvalidParameterError(
            f"unknown noise family {family!r}, expected one of {NOISE_FAMILIES}"
        )
    rate_per_unit = float(priors @ unit_off)
    if target_rate == 0.0:
        return 0.0
    strength = target_rate / rate_per_unit
    build_matrix(family, num_classes, strength)
    return strength


def inject_noise(
    clean_labels: Sequence[int] | np.ndarray, matrix: TransitionMatrix, seed: int
) -> tuple[np.ndarray, NoiseReport]:
    """Resample each label from its transition row; deterministic per seed.

    Uses inverse-CDF sampling on a dedicated random stream, so identical
    (labels, matrix, seed) inputs give bit-identical outputs.
    """
    clean = np.asarray(clean_labels, dtype=int)
    if clean.ndim != 1 or clean.size == 0:
        raise ShapeError(f"labels must be a nonempty 1-D array, got shape {clean.shape}")
    num_classes = matrix.num_classes
    if clean.min() < 1 or clean.max() > num_classes:
        raise InvalidClassError(f"labels outside 1..{num_classes}")
    cumulative = np.cumsum(matrix.entries, axis=1)
    cumulative[:, -1] = 1.0  # guard the last bin against float round-off
    rng = np.random.default_rng(seed)
    draws = rng.random(clean.size)
    rows = cumulative[clean - 1]
    noisy = (rows <= draws[:, None]).sum(axis=1).astype(int) + 1
    flipped = noisy != clean
    flips_per_class = np.bincount(clean[flipped] - 1, minlength=num_classes)
    counts = np.bincount(clean - 1, minlength=num_classes)
    report = NoiseReport(
        requested_rate=realized_noise_rate(matrix, counts / clean.size),
        realized_flip_fraction=float(flipped.mean()),
        flips_per_class=flips_per_class,
        sample_count=int(clean.size),
    )
    return noisy, report
