"""Experiment configuration: strict JSON schema, defaulting, and hashing.

A config file is a JSON object with four blocks plus run-level keys::

    {
      "dataset": {"kind": "blobs", "num_classes": 4, "dim": 2,
                  "counts": [100, 100, 100, 100], "spacing": 1.0,
                  "feature_scale": 0.6, "seed": 7},
      "noise":   {"family": "quasi_gaussian", "strength": 0.1, "seed": 11},
      "split":   {"folds": 5, "seed": 13, "run_folds": "all"},
      "methods": [{"method": "coteaching", "update_label": "soft", ...}],
      "seeds":   [0, 1, 2],
      "output_dir": "out",
      "jobs": null
    }

Unknown keys are rejected. ``resolve`` fills every default so the stored
resolved config replays the run exactly; the config hash covers everything
except ``output_dir`` and ``jobs``, which don't affect results.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .noise import NOISE_FAMILIES
from .trainers import MethodConfig

COUNT_PRESETS = {
    # Class balance of the public LIMUC endoscopic severity dataset.
    "limuc": [6105, 3052, 1254, 865],
}

_DATASET_KEYS_BLOBS = {
    "kind", "num_classes", "dim", "counts", "spacing", "feature_scale", "seed",
}
_DATASET_KEYS_CSV = {"kind", "path"}
_NOISE_KEYS = {"family", "strength", "target_rate", "seed"}
_SPLIT_KEYS = {"folds", "seed", "run_folds"}
_TOP_KEYS = {"dataset", "noise", "split", "methods", "seeds", "output_dir", "jobs"}

_METHOD_DEFAULTS = {
    "selection_label": "hard",
    "update_label": None,  # filled per method below
    "temperature": 0.1,
    "reg_weight": 0.1,
    "noise_rate": None,  # falls back to noise.target_rate
    "warmup_epochs": 5,
    "epochs": 150,
    "batch_size": 64,
    "learning_rate": 1e-3,
    "smoothing": 0.1,
    "hidden_units": 32,
    "weight_decay": 0.0,
    "lr_milestones": [],
    "lr_decay": 0.1,
    "include_selection_divergence": True,
}
_METHOD_UPDATE_DEFAULTS = {"sord": "soft", "label_smooth": "smoothed"}


def _reject_unknown(block: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _require(block: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in block:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return block[key]


def _resolve_dataset(block: Any) -> dict[str, Any]:
    if not isinstance(block, dict):
        raise ConfigError("dataset block must be an object")
    kind = _require(block, "kind", "dataset")
    if kind == "csv":
        _reject_unknown(block, _DATASET_KEYS_CSV, "dataset")
        return {"kind": "csv", "path": str(_require(block, "path", "dataset"))}
    if kind != "blobs":
        raise ConfigError(f"dataset.kind must be 'blobs' or 'csv', got {kind!r}")
    _reject_unknown(block, _DATASET_KEYS_BLOBS, "dataset")
    counts = _require(block, "counts", "dataset")
    if isinstance(counts, str):
        if counts not in COUNT_PRESETS:
            raise ConfigError(
                f"dataset.counts preset {counts!r} unknown, expected one of "
                f"{sorted(COUNT_PRESETS)}"
            )
        counts = COUNT_PRESETS[counts]
    if not isinstance(counts, list) or not all(isinstance(c, int) and c >= 1 for c in counts):
        raise ConfigError("dataset.counts must be a list of positive integers or a preset name")
    num_classes = int(block.get("num_classes", len(counts)))
    if num_classes != len(counts):
        raise ConfigError(
            f"dataset.num_classes ({num_classes}) disagrees with {len(counts)} counts"
        )
    return {
        "kind": "blobs",
        "num_classes": num_classes,
        "dim": int(block.get("dim", 2)),
        "counts": counts,
        "spacing": float(block.get("spacing", 1.0)),
        "feature_scale": float(block.get("feature_scale", 0.6)),
        "seed": int(block.get("seed", 0)),
    }


def _resolve_noise(block: Any) -> dict[str, Any]:
    if not isinstance(block, dict):
        raise ConfigError("noise block must be an object")
    _reject_unknown(block, _NOISE_KEYS, "noise")
    family = block.get("family", "none")
    if family != "none" and family not in NOISE_FAMILIES:
        raise ConfigError(
            f"noise.family must be 'none' or one of {NOISE_FAMILIES}, got {family!r}"
        )
    strength = block.get("strength")
    target_rate = block.get("target_rate")
    if family == "none" and (strength is not None or target_rate is not None):
        raise ConfigError("noise.family 'none' takes neither strength nor target_rate")
    if family != "none" and strength is None and target_rate is None:
        raise ConfigError("noise block needs strength or target_rate")
    return {
        "family": family,
        "strength": None if strength is None else float(strength),
        "target_rate": None if target_rate is None else float(target_rate),
        "seed": int(block.get("seed", 0)),
    }


def _resolve_split(block: Any) -> dict[str, Any]:
    if not isinstance(block, dict):
        raise ConfigError("split block must be an object")
    _reject_unknown(block, _SPLIT_KEYS, "split")
    folds = int(block.get("folds", 5))
    if folds < 2:
        raise ConfigError(f"split.folds must be >= 2, got {folds}")
    run_folds = block.get("run_folds", "all")
    if run_folds == "all":
        run_folds = list(range(folds))
    if not isinstance(run_folds, list) or not all(
        isinstance(f, int) and 0 <= f < folds for f in run_folds
    ):
        raise ConfigError(f"split.run_folds must be 'all' or fold indices in 0..{folds - 1}")
    if not run_folds:
        raise ConfigError("split.run_folds must name at least one fold")
    return {"folds": folds, "seed": int(block.get("seed", 0)), "run_folds": run_folds}


def _resolve_method(block: Any, index: int, noise_block: Mapping[str, Any]) -> dict[str, Any]:
    where = f"methods[{index}]"
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = set(_METHOD_DEFAULTS) | {"method"}
    _reject_unknown(block, allowed, where)
    method = _require(block, "method", where)
    resolved: dict[str, Any] = {"method": method}
    for key, default in _METHOD_DEFAULTS.items():
        resolved[key] = block.get(key, default)
    float_keys = (
        "temperature", "reg_weight", "learning_rate", "smoothing", "weight_decay", "lr_decay",
    )
    int_keys = ("warmup_epochs", "epochs", "batch_size", "hidden_units")
    try:
        for key in float_keys:
            resolved[key] = float(resolved[key])
        for key in int_keys:
            resolved[key] = int(resolved[key])
        if resolved["noise_rate"] is not None:
            resolved["noise_rate"] = float(resolved["noise_rate"])
        resolved["include_selection_divergence"] = bool(resolved["include_selection_divergence"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if resolved["update_label"] is None:
        resolved["update_label"] = _METHOD_UPDATE_DEFAULTS.get(method, "hard")
    if resolved["noise_rate"] is None:
        if noise_block["family"] == "none":
            resolved["noise_rate"] = 0.0
        elif noise_block["target_rate"] is not None:
            resolved["noise_rate"] = noise_block["target_rate"]
        else:
            raise ConfigError(
                f"{where}: noise_rate not given and noise block has no target_rate to "
                "inherit; set one explicitly"
            )
    if not isinstance(resolved["lr_milestones"], list) or not all(
        isinstance(m, int) for m in resolved["lr_milestones"]
    ):
        raise ConfigError(f"{where}: lr_milestones must be a list of epoch indices")
    method_config(resolved).validate()
    return resolved


def method_config(resolved: Mapping[str, Any], seed: int = 0) -> MethodConfig:
    """Build a MethodConfig from a resolved method dict plus the run seed."""
    kwargs = dict(resolved)
    kwargs["lr_milestones"] = tuple(kwargs.get("lr_milestones", ()))
    kwargs["seed"] = seed
    return MethodConfig(**kwargs)


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: every field explicit, replayable, hashable."""

    dataset: dict[str, Any]
    noise: dict[str, Any]
    split: dict[str, Any]
    methods: list[dict[str, Any]]
    seeds: list[int]
    output_dir: str
    jobs: int | None

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Short digest of everything that affects results (not output_dir/jobs)."""
        payload = self.to_dict()
        payload.pop("output_dir")
        payload.pop("jobs")
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def resolve(raw: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a parsed config object and fill in every default."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    noise_block = _resolve_noise(raw.get("noise", {"family": "none"}))
    methods_raw = _require(raw, "methods", "config")
    if not isinstance(methods_raw, list) or not methods_raw:
        raise ConfigError("config.methods must be a nonempty list")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("config.seeds must be a nonempty list of integers")
    jobs = raw.get("jobs")
    if jobs is not None and (not isinstance(jobs, int) or jobs < 1):
        raise ConfigError("config.jobs must be a positive integer or null")
    return ExperimentConfig(
        dataset=_resolve_dataset(_require(raw, "dataset", "config")),
        noise=noise_block,
        split=_resolve_split(raw.get("split", {})),
        methods=[_resolve_method(m, i, noise_block) for i, m in enumerate(methods_raw)],
        seeds=list(seeds),
        output_dir=str(raw.get("output_dir", "out")),
        jobs=jobs,
    )


def load_config(path) -> ExperimentConfig:
    """Read and resolve a JSON config file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve(raw)
