"""Render per-epoch curves from a results directory to SVG files.

One figure per metric per noise setting: the mean curve of every method
variant, with a +-std band whenever more than one (fold, seed) series exists.
Label-precision figures carry a horizontal reference line at 1 - noise rate,
the precision a random selection would achieve.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.fonttype"] = "none"  # keep SVG text as text, not glyph paths

import matplotlib.pyplot as plt
import numpy as np

PLOT_METRICS = ("acc_mean", "mae_mean", "mf1_mean", "label_precision")

_METRIC_TITLES = {
    "acc_mean": "Test accuracy",
    "mae_mean": "Test MAE",
    "mf1_mean": "Test macro-F1",
    "label_precision": "Label precision of selected samples",
}


def _read_epoch_column(path: Path, column: str) -> np.ndarray | None:
    if not path.is_file():
        raise FileNotFoundError(f"per-epoch CSV missing: {path}")
    with open(path, "r", encoding="utf-8", newline="") as handle:
        values = []
        for row in csv.DictReader(handle):
            cell = row[column]
            if cell == "":
                return None
            values.append(float(cell))
    return np.asarray(values) if values else None


def _method_label(summary: dict) -> str:
    method = summary["method"]
    if method in ("standard", "sord", "label_smooth"):
        return method
    return f"{method} {summary['selection_label']}/{summary['update_label']}"


def plot_results(results_dir, out_dir=None) -> list[Path]:
    """Write one SVG per metric per (noise family, rate) group; returns the paths."""
    results_dir = Path(results_dir)
    runs_dir = results_dir / "runs"
    summary_paths = sorted(runs_dir.glob("*.summary.json")) if runs_dir.is_dir() else []
    if not summary_paths:
        raise FileNotFoundError(f"no run summaries found under {runs_dir}")
    out_dir = Path(out_dir) if out_dir is not None else results_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)

    # group -> metric -> method label -> list of per-epoch arrays
    groups: dict[tuple[str, float], dict[str, dict[str, list[np.ndarray]]]] = defaultdict(
        lambda: defaultdict(lambda: defaultdict(list))
    )
    digest = "results"
    for path in summary_paths:
        summary = json.loads(path.read_text(encoding="utf-8"))
        digest = summary.get("config_hash", digest)
        key = (summary["noise_family"], float(summary["eps"]))
        label = _method_label(summary)
        epochs_csv = runs_dir / summary["epochs_csv"]
        for metric in PLOT_METRICS:
            series = _read_epoch_column(epochs_csv, metric)
            if series is not None and series.size:
                groups[key][metric][label].append(series)

    written: list[Path] = []
    for (family, eps), by_metric in sorted(groups.items()):
        for metric in PLOT_METRICS:
            by_label = by_metric.get(metric)
            if not by_label:
                continue
            fig, ax = plt.subplots(figsize=(7, 4.5))
            for label in sorted(by_label):
                series = by_label[label]
                length = min(s.size for s in series)
                stack = np.vstack([s[:length] for s in series])
                epochs = np.arange(1, length + 1)
                mean = stack.mean(axis=0)
                (line,) = ax.plot(epochs, mean, label=label)
                if stack.shape[0] > 1:
                    std = stack.std(axis=0)
                    ax.fill_between(
                        epochs, mean - std, mean + std, alpha=0.2, color=line.get_color()
                    )
            if metric == "label_precision":
                ax.axhline(
                    1.0 - eps, color="pink", linestyle="--", label="random selection (1 - noise rate)"
                )
            ax.set_xlabel("epoch")
            ax.set_ylabel(_METRIC_TITLES[metric])
            ax.set_title(f"{_METRIC_TITLES[metric]} ({family}, rate {eps:g})")
            ax.legend(fontsize=8)
            fig.tight_layout()
            out_path = out_dir / f"{metric}.{family}_eps{eps:g}.{digest}.svg"
            fig.savefig(out_path, format="svg")
            plt.close(fig)
            written.append(out_path)
    return written
