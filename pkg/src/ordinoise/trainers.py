"""Training loops: single-network baselines and the three dual-network backbones.

Every loop follows the same cadence: shuffle the training ids each epoch, walk
floor(N / batch_size) full mini-batches (the final partial batch is dropped so
keep-rate arithmetic stays uniform), select where applicable, update, then
evaluate on the clean test split. Selection always happens before either
network is updated within an iteration, and in the cross-update backbones each
network descends on the batch its peer picked.

A run is a pure function of (config, dataset, split): all randomness flows
from streams derived from ``config.seed``, so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import labels as lb
from . import metrics as mt
from . import mlp
from . import selection as sel
from .dataset import FoldSplit, OrdinalDataset, TrainView
from .errors import ConfigError
from .metrics import EpochRecord

SINGLE_NETWORK_METHODS = ("standard", "sord", "label_smooth")
DUAL_NETWORK_METHODS = ("coteaching", "jocor", "codis")
METHODS = SINGLE_NETWORK_METHODS + DUAL_NETWORK_METHODS

ABLATION_CELLS = (("hard", "hard"), ("soft", "soft"), ("hard", "soft"))

SelectionHook = Callable[[int, int, tuple[sel.SelectionOutcome, ...]], None]


@dataclass(frozen=True)
class MethodConfig:
    """Everything one training run needs besides the data.

    ``noise_rate`` is the rate assumed by the keep-rate schedule, not the
    rate actually injected into the data. ``selection_label`` and
    ``update_label`` are the two loss-usage axes: hard/hard reproduces the
    original backbones, hard/soft is the relaxed variant, soft/soft the
    consistency probe.
    """

    method: str
    selection_label: str = "hard"
    update_label: str = "hard"
    temperature: float = 0.1
    reg_weight: float = 0.1
    noise_rate: float = 0.2
    warmup_epochs: int = 5
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    smoothing: float = 0.1
    hidden_units: int = 32
    weight_decay: float = 0.0
    lr_milestones: tuple[int, ...] = ()
    lr_decay: float = 0.1
    include_selection_divergence: bool = True

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.selection_label not in ("hard", "soft"):
            raise ConfigError(f"selection_label must be hard or soft, got {self.selection_label!r}")
        if self.update_label not in lb.LABEL_KINDS:
            raise ConfigError(
                f"update_label must be one of {lb.LABEL_KINDS}, got {self.update_label!r}"
            )
        if self.method == "sord" and self.update_label != "soft":
            raise ConfigError("method 'sord' requires update_label='soft'")
        if self.method == "label_smooth" and self.update_label != "smoothed":
            raise ConfigError("method 'label_smooth' requires update_label='smoothed'")
        if not 0.0 < self.temperature <= 1.0:
            raise ConfigError(f"temperature must be in (0, 1], got {self.temperature}")
        if self.reg_weight < 0:
            raise ConfigError(f"reg_weight must be nonnegative, got {self.reg_weight}")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be nonnegative, got {self.epochs}")
        if self.warmup_epochs < 1:
            raise ConfigError(f"warmup_epochs must be >= 1, got {self.warmup_epochs}")
        if self.epochs and self.warmup_epochs > self.epochs:
            raise ConfigError(
                f"warmup_epochs ({self.warmup_epochs}) cannot exceed epochs ({self.epochs})"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.smoothing < 1.0:
            raise ConfigError(f"smoothing must be in [0, 1), got {self.smoothing}")
        if self.hidden_units < 1:
            raise ConfigError(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if any(m < 1 for m in self.lr_milestones):
            raise ConfigError("lr_milestones must be epoch indices >= 1")

    @property
    def is_dual(self) -> bool:
        return self.method in DUAL_NETWORK_METHODS


@dataclass(frozen=True)
class SelectionSummary:
    """Per-epoch digest of selection behavior (dual-network methods only)."""

    epoch: int
    keep_rate: float
    selected_per_batch: int
    label_precision_net1: float
    label_precision_net2: float


@dataclass
class RunTrace:
    """Everything a finished run leaves behind."""

    records: list[EpochRecord] = field(default_factory=list)
    selection_summaries: list[SelectionSummary] = field(default_factory=list)
    final_params: tuple[mlp.MlpParams, mlp.MlpParams | None] = (None, None)  # type: ignore[assignment]


class _RunSetup:
    """Shared plumbing: derived seeds, cached arrays, label rows, evaluation."""

    def __init__(self, config: MethodConfig, dataset: OrdinalDataset, split: FoldSplit):
        config.validate()
        self.config = config
        self.dataset = dataset
        self.split = split
        self.num_classes = dataset.num_classes

        seed_seq = np.random.SeedSequence(config.seed)
        shuffle_seq, init_1, init_2 = seed_seq.spawn(3)
        self.shuffle_rng = np.random.default_rng(shuffle_seq)
        self.init_seed_1 = int(init_1.generate_state(1)[0])
        self.init_seed_2 = int(init_2.generate_state(1)[0])

        self.train = dataset.train_view(split.train_ids)
        self.val = dataset.train_view(split.val_ids) if len(split.val_ids) else None
        self.test_features = dataset.train_view(split.test_ids).features
        self.test_truth = mt.true_labels(dataset, split.test_ids)

        self.iters_per_epoch = len(self.train) // config.batch_size
        if config.epochs > 0 and self.iters_per_epoch == 0:
            raise ConfigError(
                f"batch_size {config.batch_size} exceeds the {len(self.train)}-sample "
                "training split; no full mini-batch can be formed"
            )
        self.update_rows = lb.label_matrix(
            config.update_label, self.train.labels, self.num_classes, config.smoothing
        )
        self.clean_flags = mt.clean_flag_map(dataset)
        self.schedule = (
            sel.Schedule(config.noise_rate, config.warmup_epochs, config.epochs)
            if config.epochs > 0
            else None
        )

    def new_network(self, init_seed: int) -> tuple[mlp.MlpParams, mlp.AdamState]:
        params = mlp.init_mlp(
            self.dataset.dim, self.config.hidden_units, self.num_classes, init_seed
        )
        state = mlp.AdamState.for_params(
            params, self.config.learning_rate, self.config.weight_decay
        )
        return params, state

    def epoch_learning_rate(self, epoch: int) -> float:
        passed = sum(1 for m in self.config.lr_milestones if epoch >= m)
        return self.config.learning_rate * self.config.lr_decay**passed

    def batch_at(self, perm: np.ndarray, iteration: int) -> tuple[TrainView, np.ndarray]:
        size = self.config.batch_size
        pos = perm[iteration * size : (iteration + 1) * size]
        batch = TrainView(
            ids=self.train.ids[pos],
            features=self.train.features[pos],
            labels=self.train.labels[pos],
        )
        return batch, pos

    def _eval_network(self, params: mlp.MlpParams) -> tuple[float, float, float]:
        pred = np.argmax(mlp.forward(params, self.test_features), axis=1) + 1
        return (
            mt.accuracy(pred, self.test_truth),
            mt.mae(pred, self.test_truth),
            mt.macro_f1(pred, self.test_truth, self.num_classes),
        )

    def _val_accuracy(self, params_list: Sequence[mlp.MlpParams]) -> float | None:
        # Validation labels are noisy by design; this is logged, never consumed.
        if self.val is None:
            return None
        accs = []
        for params in params_list:
            pred = np.argmax(mlp.forward(params, self.val.features), axis=1) + 1
            accs.append(mt.accuracy(pred, self.val.labels))
        return float(np.mean(accs))

    def epoch_record(
        self,
        epoch: int,
        train_loss: float,
        params_list: Sequence[mlp.MlpParams],
        precision_pair: tuple[float, float] | None = None,
        selected_count: int | None = None,
    ) -> EpochRecord:
        evals = [self._eval_network(p) for p in params_list]
        if len(evals) == 1:
            evals = evals * 2
        (acc1, mae1, mf11), (acc2, mae2, mf12) = evals
        precision_kwargs = {}
        if precision_pair is not None:
            precision_kwargs = dict(
                label_precision_net1=precision_pair[0],
                label_precision_net2=precision_pair[1],
                label_precision=float(np.mean(precision_pair)),
                selected_count=selected_count,
            )
        return EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            acc_net1=acc1,
            acc_net2=acc2,
            acc_mean=float((acc1 + acc2) / 2),
            mae_net1=mae1,
            mae_net2=mae2,
            mae_mean=float((mae1 + mae2) / 2),
            mf1_net1=mf11,
            mf1_net2=mf12,
            mf1_mean=float((mf11 + mf12) / 2),
            val_acc_mean=self._val_accuracy(params_list),
            **precision_kwargs,
        )


class _PrecisionTally:
    """Selected-weighted label-precision accounting for one epoch."""

    def __init__(self, clean_flags: dict[int, bool]):
        self.clean_flags = clean_flags
        self.clean = [0, 0]
        self.total = [0, 0]

    def add(self, net_index: int, outcome: sel.SelectionOutcome) -> None:
        flags = np.asarray([self.clean_flags[int(i)] for i in outcome.ids], dtype=bool)
        outcome.clean_flags = flags
        self.clean[net_index] += int(flags.sum())
        self.total[net_index] += flags.size

    def rates(self) -> tuple[float, float]:
        return (
            self.clean[0] / self.total[0] if self.total[0] else 0.0,
            self.clean[1] / self.total[1] if self.total[1] else 0.0,
        )


def train_standard(
    config: MethodConfig, dataset: OrdinalDataset, split: FoldSplit
) -> RunTrace:
    """Single network, no selection; the label kind decides the baseline flavor.

    hard labels give the plain noisy-label baseline, soft labels the relaxed
    single-network variant, smoothed labels the uniform-smoothing one.
    """
    setup = _RunSetup(config, dataset, split)
    params, state = setup.new_network(setup.init_seed_1)
    trace = RunTrace()
    for epoch in range(1, config.epochs + 1):
        state.learning_rate = setup.epoch_learning_rate(epoch)
        perm = setup.shuffle_rng.permutation(len(setup.train))
        losses = []
        for t in range(setup.iters_per_epoch):
            batch, pos = setup.batch_at(perm, t)
            loss, grads = mlp.loss_and_grads(params, batch.features, setup.update_rows[pos])
            params = mlp.adam_step(params, grads, state)
            losses.append(loss)
        trace.records.append(setup.epoch_record(epoch, float(np.mean(losses)), [params]))
    trace.final_params = (params, None)
    return trace


def _cross_update_loop(
    config: MethodConfig,
    setup: _RunSetup,
    select_fn: Callable[..., tuple[sel.SelectionOutcome, sel.SelectionOutcome]],
    selection_hook: SelectionHook | None,
) -> RunTrace:
    params_1, state_1 = setup.new_network(setup.init_seed_1)
    params_2, state_2 = setup.new_network(setup.init_seed_2)
    trace = RunTrace()
    for epoch in range(1, config.epochs + 1):
        state_1.learning_rate = state_2.learning_rate = setup.epoch_learning_rate(epoch)
        rate = sel.keep_rate(setup.schedule, epoch)
        perm = setup.shuffle_rng.permutation(len(setup.train))
        tally = _PrecisionTally(setup.clean_flags)
        losses = []
        count = None
        for t in range(setup.iters_per_epoch):
            batch, pos = setup.batch_at(perm, t)
            out_1, out_2 = select_fn(params_1, params_2, batch, rate)
            count = out_1.indices.size
            rows = setup.update_rows[pos]
            # Cross update: each network descends on its peer's picks.
            loss_1, grads_1 = mlp.loss_and_grads(
                params_1, batch.features[out_2.indices], rows[out_2.indices]
            )
            loss_2, grads_2 = mlp.loss_and_grads(
                params_2, batch.features[out_1.indices], rows[out_1.indices]
            )
            params_1 = mlp.adam_step(params_1, grads_1, state_1)
            params_2 = mlp.adam_step(params_2, grads_2, state_2)
            tally.add(0, out_1)
            tally.add(1, out_2)
            losses.append((loss_1 + loss_2) / 2)
            if selection_hook is not None:
                selection_hook(epoch, t, (out_1, out_2))
        precision = tally.rates()
        trace.records.append(
            setup.epoch_record(
                epoch, float(np.mean(losses)), [params_1, params_2], precision, count
            )
        )
        trace.selection_summaries.append(
            SelectionSummary(epoch, rate, count, precision[0], precision[1])
        )
    trace.final_params = (params_1, params_2)
    return trace


def train_coteaching(
    config: MethodConfig,
    dataset: OrdinalDataset,
    split: FoldSplit,
    selection_hook: SelectionHook | None = None,
) -> RunTrace:
    """Dual networks exchanging small-loss picks every iteration."""
    setup = _RunSetup(config, dataset, split)

    def select_fn(params_1, params_2, batch, rate):
        return sel.coteaching_select(
            params_1, params_2, batch, config.temperature, rate, config.selection_label
        )

    return _cross_update_loop(config, setup, select_fn, selection_hook)


def train_codis(
    config: MethodConfig,
    dataset: OrdinalDataset,
    split: FoldSplit,
    selection_hook: SelectionHook | None = None,
) -> RunTrace:
    """Cross-update training with discrepancy-adjusted selection scores."""
    setup = _RunSetup(config, dataset, split)

    def select_fn(params_1, params_2, batch, rate):
        return sel.codis_select(
            params_1,
            params_2,
            batch,
            config.temperature,
            rate,
            config.reg_weight,
            config.selection_label,
        )

    return _cross_update_loop(config, setup, select_fn, selection_hook)


def train_jocor(
    config: MethodConfig,
    dataset: OrdinalDataset,
    split: FoldSplit,
    selection_hook: SelectionHook | None = None,
) -> RunTrace:
    """Dual networks sharing one selected set and one joint divergence-coupled loss."""
    setup = _RunSetup(config, dataset, split)
    params_1, state_1 = setup.new_network(setup.init_seed_1)
    params_2, state_2 = setup.new_network(setup.init_seed_2)
    trace = RunTrace()
    for epoch in range(1, config.epochs + 1):
        state_1.learning_rate = state_2.learning_rate = setup.epoch_learning_rate(epoch)
        rate = sel.keep_rate(setup.schedule, epoch)
        perm = setup.shuffle_rng.permutation(len(setup.train))
        tally = _PrecisionTally(setup.clean_flags)
        losses = []
        count = None
        for t in range(setup.iters_per_epoch):
            batch, pos = setup.batch_at(perm, t)
            shared = sel.jocor_select(
                params_1,
                params_2,
                batch,
                config.temperature,
                rate,
                config.reg_weight,
                config.selection_label,
                config.include_selection_divergence,
            )
            count = shared.indices.size
            rows = setup.update_rows[pos]
            loss, grads_1, grads_2 = mlp.jocor_loss_and_grads(
                params_1,
                params_2,
                batch.features[shared.indices],
                rows[shared.indices],
                config.reg_weight,
            )
            params_1 = mlp.adam_step(params_1, grads_1, state_1)
            params_2 = mlp.adam_step(params_2, grads_2, state_2)
            tally.add(0, shared)
            tally.add(1, shared)
            losses.append(loss)
            if selection_hook is not None:
                selection_hook(epoch, t, (shared,))
        precision = tally.rates()
        trace.records.append(
            setup.epoch_record(
                epoch, float(np.mean(losses)), [params_1, params_2], precision, count
            )
        )
        trace.selection_summaries.append(
            SelectionSummary(epoch, rate, count, precision[0], precision[1])
        )
    trace.final_params = (params_1, params_2)
    return trace


_TRAINERS = {
    "standard": train_standard,
    "sord": train_standard,
    "label_smooth": train_standard,
    "coteaching": train_coteaching,
    "jocor": train_jocor,
    "codis": train_codis,
}


def train(
    config: MethodConfig,
    dataset: OrdinalDataset,
    split: FoldSplit,
    selection_hook: SelectionHook | None = None,
) -> RunTrace:
    """Dispatch to the trainer for ``config.method``."""
    config.validate()
    trainer = _TRAINERS[config.method]
    if config.is_dual:
        return trainer(config, dataset, split, selection_hook)
    return trainer(config, dataset, split)


def run_ablation_grid(
    config: MethodConfig,
    dataset: OrdinalDataset,
    split: FoldSplit,
    include_soft_hard: bool = False,
) -> dict[tuple[str, str], RunTrace]:
    """Run the (selection_label, update_label) grid cells on identical data and seed.

    Cells are hard/hard, soft/soft, and hard/soft, optionally plus soft/hard.
    The base method must be a dual-network backbone.
    """
    config.validate()
    if not config.is_dual:
        raise ConfigError(f"ablation grid needs a dual-network method, got {config.method!r}")
    cells = ABLATION_CELLS + ((("soft", "hard"),) if include_soft_hard else ())
    results: dict[tuple[str, str], RunTrace] = {}
    for selection_label, update_label in cells:
        cell_config = replace(
            config, selection_label=selection_label, update_label=update_label
        )
        results[(selection_label, update_label)] = train(cell_config, dataset, split)
    return results


def ablation_table(results: dict[tuple[str, str], RunTrace], k: int = 10) -> str:
    """Plain-text comparison of the grid cells on last-k-averaged metrics."""
    header = f"{'selection':<10} {'update':<9} {'acc':>8} {'mae':>8} {'mf1':>8} {'precision':>10}"
    lines = [header, "-" * len(header)]
    for (selection_label, update_label), trace in results.items():
        summary = mt.last_k_average(trace, k)
        precision = summary.get("label_precision")
        precision_text = "-" if precision is None else f"{precision:.4f}"
        lines.append(
            f"{selection_label:<10} {update_label:<9} "
            f"{summary['acc_mean']:>8.4f} {summary['mae_mean']:>8.4f} "
            f"{summary['mf1_mean']:>8.4f} {precision_text:>10}"
        )
    return "\n".join(lines)
