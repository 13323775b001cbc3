"""Experiment execution: dataset materialization, grid runs, and file outputs.

Every output file name carries the resolved-config digest, and the stored
resolved config replays the run bit-identically. Grid-level files are written
atomically (write-then-rename), so an interrupted run never leaves a partial
summary behind. Cells are independent pure computations and may run on a
process pool; a failing cell records its error in the grid summary and the
remaining cells continue.
"""

from __future__ import annotations

import csv
import io
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import config as cfg
from . import metrics as mt
from . import trainers
from .dataset import FoldSplit, OrdinalDataset, generate_ordinal_blobs, load_csv, make_folds
from .errors import ConfigError
from .metrics import EpochRecord
from .noise import TransitionMatrix, build_matrix, calibrate_strength

EPOCH_CSV_COLUMNS = (
    "epoch",
    "train_loss",
    "acc_net1",
    "acc_net2",
    "acc_mean",
    "mae_mean",
    "mf1_mean",
    "label_precision",
    "selected_count",
)

GRID_CSV_COLUMNS = (
    "method",
    "selection_label",
    "update_label",
    "noise_family",
    "eps",
    "fold",
    "seed",
    "acc",
    "mae",
    "mf1",
    "label_precision",
    "error",
)

LAST_K_WINDOW = 10


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partial content."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _fmt(value, decimals: int = 6) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{decimals}f}"


def epochs_csv_text(records: Sequence[EpochRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(EPOCH_CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.epoch,
                _fmt(r.train_loss),
                _fmt(r.acc_net1),
                _fmt(r.acc_net2),
                _fmt(r.acc_mean),
                _fmt(r.mae_mean),
                _fmt(r.mf1_mean),
                _fmt(r.label_precision),
                _fmt(r.selected_count),
            ]
        )
    return buf.getvalue()


def grid_csv_text(rows: Sequence[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(GRID_CSV_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row["method"],
                row["selection_label"],
                row["update_label"],
                row["noise_family"],
                _fmt(row["eps"], 4),
                row["fold"],
                row["seed"],
                _fmt(row.get("acc")),
                _fmt(row.get("mae")),
                _fmt(row.get("mf1")),
                _fmt(row.get("label_precision")),
                row.get("error", ""),
            ]
        )
    return buf.getvalue()


def materialize_dataset(dataset_block: Mapping[str, Any]) -> OrdinalDataset:
    """Build or load the clean dataset a config describes."""
    if dataset_block["kind"] == "csv":
        return load_csv(dataset_block["path"])
    return generate_ordinal_blobs(
        num_classes=dataset_block["num_classes"],
        dim=dataset_block["dim"],
        counts=dataset_block["counts"],
        spacing=dataset_block["spacing"],
        feature_scale=dataset_block["feature_scale"],
        seed=dataset_block["seed"],
    )


def resolve_noise_strength(experiment: cfg.ExperimentConfig, dataset: OrdinalDataset) -> dict:
    """Return the resolved config dict with a concrete noise strength filled in.

    When only a target rate is given, the strength is calibrated against the
    dataset's empirical class priors so the expected flip rate matches.
    """
    resolved = experiment.to_dict()
    block = resolved["noise"]
    if block["family"] != "none" and block["strength"] is None:
        block["strength"] = calibrate_strength(
            block["family"], dataset.num_classes, dataset.class_priors(), block["target_rate"]
        )
    return resolved


def noise_matrix(noise_block: Mapping[str, Any], num_classes: int) -> TransitionMatrix | None:
    if noise_block["family"] == "none":
        return None
    if noise_block["strength"] is None:
        raise ConfigError("noise strength unresolved; run via run_experiment or gen_data")
    return build_matrix(noise_block["family"], num_classes, noise_block["strength"])


def fold_noise_seed(noise_seed: int, fold_index: int) -> int:
    """Per-fold injection stream derived from the configured noise seed."""
    child = np.random.SeedSequence(noise_seed).spawn(fold_index + 1)[-1]
    return int(child.generate_state(1)[0])


def noisy_fold_dataset(
    dataset: OrdinalDataset,
    matrix: TransitionMatrix | None,
    split: FoldSplit,
    noise_seed: int,
    fold_index: int,
):
    """Inject noise into the train and validation ids; the test split stays clean."""
    if matrix is None:
        return dataset, None
    target_ids = np.concatenate([split.train_ids, split.val_ids])
    return dataset.with_noise(matrix, fold_noise_seed(noise_seed, fold_index), target_ids)


def cell_id(method_index: int, method: Mapping[str, Any], fold: int, seed: int) -> str:
    return (
        f"m{method_index:02d}_{method['method']}"
        f"_{method['selection_label']}-{method['update_label']}_fold{fold}_seed{seed}"
    )


def _execute_cell(payload: dict) -> dict:
    """Run one (method, fold, seed) cell and write its per-epoch CSV and summary JSON.

    Runs inside a worker process; must stay picklable and self-contained.
    """
    resolved = payload["resolved"]
    method_index = payload["method_index"]
    fold_index = payload["fold"]
    seed = payload["seed"]
    out_dir = Path(payload["out_dir"])
    digest = payload["digest"]
    method = resolved["methods"][method_index]
    row: dict[str, Any] = {
        "method": method["method"],
        "selection_label": method["selection_label"],
        "update_label": method["update_label"],
        "noise_family": resolved["noise"]["family"],
        "eps": method["noise_rate"],
        "fold": fold_index,
        "seed": seed,
        "error": "",
    }
    try:
        dataset = materialize_dataset(resolved["dataset"])
        plan = make_folds(dataset, resolved["split"]["folds"], resolved["split"]["seed"])
        split = plan.folds[fold_index]
        matrix = noise_matrix(resolved["noise"], dataset.num_classes)
        noisy, report = noisy_fold_dataset(
            dataset, matrix, split, resolved["noise"]["seed"], fold_index
        )
        method_config = cfg.method_config(method, seed=seed)
        trace = trainers.train(method_config, noisy, split)
        summary = mt.last_k_average(trace, LAST_K_WINDOW) if trace.records else {}

        stem = cell_id(method_index, method, fold_index, seed)
        epochs_name = f"{stem}.{digest}.epochs.csv"
        atomic_write_text(out_dir / "runs" / epochs_name, epochs_csv_text(trace.records))
        summary_doc = {
            "cell_id": stem,
            "config_hash": digest,
            "method": method["method"],
            "selection_label": method["selection_label"],
            "update_label": method["update_label"],
            "noise_family": resolved["noise"]["family"],
            "eps": method["noise_rate"],
            "fold": fold_index,
            "seed": seed,
            "epochs_csv": epochs_name,
            "epoch_count": len(trace.records),
            "last_k": summary,
            "noise_report": None
            if report is None
            else {
                "requested_rate": report.requested_rate,
                "realized_flip_fraction": report.realized_flip_fraction,
            },
        }
        atomic_write_text(
            out_dir / "runs" / f"{stem}.{digest}.summary.json",
            json.dumps(summary_doc, indent=2, sort_keys=True) + "\n",
        )
        row["acc"] = summary.get("acc_mean")
        row["mae"] = summary.get("mae_mean")
        row["mf1"] = summary.get("mf1_mean")
        row["label_precision"] = summary.get("label_precision")
    except Exception as exc:  # cell failures are recorded, not fatal
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["traceback"] = traceback.format_exc()
    return row


@dataclass
class RunOutcome:
    rows: list[dict]
    exit_code: int
    output_dir: Path
    digest: str
    grid_csv: Path
    config_json: Path


def run_experiment(experiment: cfg.ExperimentConfig, jobs: int | None = None) -> RunOutcome:
    """Execute every (method, fold, seed) cell and write the result bundle."""
    out_dir = Path(experiment.output_dir)
    (out_dir / "runs").mkdir(parents=True, exist_ok=True)

    dataset = materialize_dataset(experiment.dataset)
    resolved = resolve_noise_strength(experiment, dataset)
    experiment = cfg.resolve(resolved)
    resolved = experiment.to_dict()
    digest = experiment.hash()

    config_json = out_dir / f"config.{digest}.json"
    atomic_write_text(config_json, json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    cells = [
        {
            "resolved": resolved,
            "method_index": mi,
            "fold": fold,
            "seed": seed,
            "out_dir": str(out_dir),
            "digest": digest,
        }
        for mi in range(len(resolved["methods"]))
        for fold in resolved["split"]["run_folds"]
        for seed in resolved["seeds"]
    ]

    if jobs is None:
        jobs = experiment.jobs or os.cpu_count() or 1
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as pool:
            rows = list(pool.map(_execute_cell, cells))
    else:
        rows = [_execute_cell(cell) for cell in cells]

    grid_csv = out_dir / f"grid_summary.{digest}.csv"
    atomic_write_text(grid_csv, grid_csv_text(rows))

    failures = sum(1 for r in rows if r["error"])
    if failures == 0:
        exit_code = 0
    elif failures == len(rows):
        exit_code = 2
    else:
        exit_code = 3
    return RunOutcome(
        rows=rows,
        exit_code=exit_code,
        output_dir=out_dir,
        digest=digest,
        grid_csv=grid_csv,
        config_json=config_json,
    )


@dataclass
class GenDataOutcome:
    dataset_csv: Path
    sidecar_csv: Path
    matrix_csv: Path | None
    realized_rate: float
    sample_count: int
    digest: str


def gen_data(experiment: cfg.ExperimentConfig, seed_override: int | None = None) -> GenDataOutcome:
    """Materialize the clean dataset CSV plus a whole-dataset noise sidecar."""
    out_dir = Path(experiment.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = materialize_dataset(experiment.dataset)
    resolved = resolve_noise_strength(experiment, dataset)
    if seed_override is not None:
        resolved["noise"]["seed"] = seed_override
    experiment = cfg.resolve(resolved)
    digest = experiment.hash()

    matrix = noise_matrix(experiment.noise, dataset.num_classes)
    matrix_csv = None
    if matrix is None:
        noisy, realized = dataset, 0.0
    else:
        noisy, report = dataset.with_noise(matrix, experiment.noise["seed"])
        realized = report.realized_flip_fraction
        matrix_csv = out_dir / f"transition_matrix.{digest}.csv"
        matrix.write_csv(matrix_csv)

    dataset_csv = out_dir / f"dataset.{digest}.csv"
    sidecar_csv = out_dir / f"noise.{digest}.csv"
    noisy.save_csv(dataset_csv)
    noisy.save_noise_sidecar(sidecar_csv)
    return GenDataOutcome(
        dataset_csv=dataset_csv,
        sidecar_csv=sidecar_csv,
        matrix_csv=matrix_csv,
        realized_rate=realized,
        sample_count=len(dataset),
        digest=digest,
    )
