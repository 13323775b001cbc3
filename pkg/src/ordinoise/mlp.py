"""A small rectified-linear MLP with hand-derived gradients and an Adam optimizer.

Architecture is d -> H (ReLU) -> C. Losses are cross-entropies between teacher
label rows and softmax outputs, with probabilities clamped at PROB_FLOOR; the
gradients are derived through the same clamped path, so clamped entries
propagate exactly zero gradient and finite-difference checks agree.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatchError, InvalidParameterError, ShapeError
from .labels import PROB_FLOOR, softmax_rows


@dataclass
class MlpParams:
    """Weights and biases; also reused as the container for gradients."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[0], self.w1.shape[1], self.w2.shape[1]

    def param_count(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, template: "MlpParams", flat: np.ndarray) -> "MlpParams":
        d, h, c = template.dims
        parts = np.split(flat, np.cumsum([d * h, h, h * c])[:3])
        return cls(parts[0].reshape(d, h), parts[1], parts[2].reshape(h, c), parts[3])


def init_mlp(dim: int, hidden: int, num_classes: int, seed: int) -> MlpParams:
    """He-scaled Gaussian weights (std sqrt(2/fan_in)), zero biases; deterministic per seed."""
    if dim < 1 or hidden < 1 or num_classes < 2:
        raise InvalidParameterError(f"bad dimensions (d={dim}, H={hidden}, C={num_classes})")
    rng = np.random.default_rng(seed)
    return MlpParams(
        w1=rng.normal(0.0, np.sqrt(2.0 / dim), size=(dim, hidden)),
        b1=np.zeros(hidden),
        w2=rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, num_classes)),
        b2=np.zeros(num_classes),
    )


def forward(params: MlpParams, features: np.ndarray) -> np.ndarray:
    """Logits for a single feature vector (d,) or a batch (n, d)."""
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.w1.shape[0]:
        raise ShapeError(
            f"features shape {np.asarray(features).shape} incompatible with input dim "
            f"{params.w1.shape[0]}"
        )
    hidden = np.maximum(x @ params.w1 + params.b1, 0.0)
    logits = hidden @ params.w2 + params.b2
    return logits[0] if single else logits


def _check_batch(params: MlpParams, features: np.ndarray, label_rows: np.ndarray):
    x = np.asarray(features, dtype=float)
    rows = np.asarray(label_rows, dtype=float)
    if x.ndim != 2 or rows.ndim != 2:
        raise ShapeError("batch features and label rows must both be 2-D")
    if x.shape[0] == 0:
        raise EmptyBatchError("batch must contain at least one sample")
    d, _, c = params.dims
    if x.shape[1] != d or rows.shape != (x.shape[0], c):
        raise ShapeError(
            f"batch shapes {x.shape} / {rows.shape} incompatible with network dims {params.dims}"
        )
    return x, rows


def _clamped_ce_rows(label_rows: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return -(label_rows * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=1)


def _ce_prob_grad(label_rows: np.ndarray, probs: np.ndarray) -> np.ndarray:
    # d(loss)/d(probs) through the clamp: zero where the clamp binds.
    clamped = np.maximum(probs, PROB_FLOOR)
    return -(label_rows / clamped) * (probs >= PROB_FLOOR)


def _softmax_backprop(probs: np.ndarray, prob_grad: np.ndarray) -> np.ndarray:
    # Jacobian-vector product of softmax: dz = p * (g - <g, p>).
    inner = (prob_grad * probs).sum(axis=1, keepdims=True)
    return probs * (prob_grad - inner)


def _backprop_from_logits(
    params: MlpParams, x: np.ndarray, hidden_pre: np.ndarray, logit_grad: np.ndarray
) -> MlpParams:
    hidden = np.maximum(hidden_pre, 0.0)
    grad_w2 = hidden.T @ logit_grad
    grad_b2 = logit_grad.sum(axis=0)
    hidden_grad = logit_grad @ params.w2.T
    hidden_grad[hidden_pre <= 0.0] = 0.0
    grad_w1 = x.T @ hidden_grad
    grad_b1 = hidden_grad.sum(axis=0)
    return MlpParams(grad_w1, grad_b1, grad_w2, grad_b2)


def loss_and_grads(
    params: MlpParams, features: np.ndarray, label_rows: np.ndarray
) -> tuple[float, MlpParams]:
    """Mean cross-entropy over the batch and its gradient w.r.t. every parameter."""
    x, rows = _check_batch(params, features, label_rows)
    n = x.shape[0]
    hidden_pre = x @ params.w1 + params.b1
    hidden = np.maximum(hidden_pre, 0.0)
    logits = hidden @ params.w2 + params.b2
    probs = softmax_rows(logits)
    loss = float(_clamped_ce_rows(rows, probs).mean())
    logit_grad = _softmax_backprop(probs, _ce_prob_grad(rows, probs)) / n
    return loss, _backprop_from_logits(params, x, hidden_pre, logit_grad)


def ce_loss(params: MlpParams, features: np.ndarray, label_rows: np.ndarray) -> float:
    x, rows = _check_batch(params, features, label_rows)
    probs = softmax_rows(forward(params, x))
    return float(_clamped_ce_rows(rows, probs).mean())


def backward(params: MlpParams, features: np.ndarray, label_rows: np.ndarray) -> MlpParams:
    """Gradient of the mean cross-entropy; label rows may be hard, soft, or smoothed."""
    return loss_and_grads(params, features, label_rows)[1]


def _jeffrey_prob_grads(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # d/dp and d/dq of sum (p - q)(ln p - ln q), through the clamp on both sides.
    cp = np.maximum(p, PROB_FLOOR)
    cq = np.maximum(q, PROB_FLOOR)
    log_diff = np.log(cp) - np.log(cq)
    grad_p = (log_diff + (cp - cq) / cp) * (p >= PROB_FLOOR)
    grad_q = (-log_diff - (cp - cq) / cq) * (q >= PROB_FLOOR)
    return grad_p, grad_q


def jocor_loss_and_grads(
    params_1: MlpParams,
    params_2: MlpParams,
    features: np.ndarray,
    label_rows: np.ndarray,
    reg_weight: float,
) -> tuple[float, MlpParams, MlpParams]:
    """Joint loss for coupled training: both cross-entropies plus the divergence penalty.

    Per sample the loss is CE(l, p1) + CE(l, p2) + reg_weight * J(p1, p2),
    averaged over the batch; both networks receive gradients from this single
    scalar.
    """
    if reg_weight < 0:
        raise InvalidParameterError(f"reg_weight must be nonnegative, got {reg_weight}")
    x, rows = _check_batch(params_1, features, label_rows)
    _check_batch(params_2, features, label_rows)
    n = x.shape[0]

    pre_1 = x @ params_1.w1 + params_1.b1
    probs_1 = softmax_rows(np.maximum(pre_1, 0.0) @ params_1.w2 + params_1.b2)
    pre_2 = x @ params_2.w1 + params_2.b1
    probs_2 = softmax_rows(np.maximum(pre_2, 0.0) @ params_2.w2 + params_2.b2)

    cp = np.maximum(probs_1, PROB_FLOOR)
    cq = np.maximum(probs_2, PROB_FLOOR)
    jeffrey_rows = ((cp - cq) * (np.log(cp) - np.log(cq))).sum(axis=1)
    loss_rows = (
        _clamped_ce_rows(rows, probs_1)
        + _clamped_ce_rows(rows, probs_2)
        + reg_weight * jeffrey_rows
    )
    loss = float(loss_rows.mean())

    j_grad_1, j_grad_2 = _jeffrey_prob_grads(probs_1, probs_2)
    prob_grad_1 = _ce_prob_grad(rows, probs_1) + reg_weight * j_grad_1
    prob_grad_2 = _ce_prob_grad(rows, probs_2) + reg_weight * j_grad_2
    logit_grad_1 = _softmax_backprop(probs_1, prob_grad_1) / n
    logit_grad_2 = _softmax_backprop(probs_2, prob_grad_2) / n
    grads_1 = _backprop_from_logits(params_1, x, pre_1, logit_grad_1)
    grads_2 = _backprop_from_logits(params_2, x, pre_2, logit_grad_2)
    return loss, grads_1, grads_2


def jocor_loss(params_1, params_2, features, label_rows, reg_weight: float) -> float:
    return jocor_loss_and_grads(params_1, params_2, features, label_rows, reg_weight)[0]


def jocor_backward(
    params_1, params_2, features, label_rows, reg_weight: float
) -> tuple[MlpParams, MlpParams]:
    """Gradients of the joint loss for both networks."""
    _, grads_1, grads_2 = jocor_loss_and_grads(
        params_1, params_2, features, label_rows, reg_weight
    )
    return grads_1, grads_2


def _zeros_like_params(params: MlpParams) -> MlpParams:
    return MlpParams(
        np.zeros_like(params.w1),
        np.zeros_like(params.b1),
        np.zeros_like(params.w2),
        np.zeros_like(params.b2),
    )


@dataclass
class AdamState:
    """Moment accumulators and hyperparameters for one network's optimizer."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: MlpParams | None = None
    v: MlpParams | None = None

    @classmethod
    def for_params(
        cls,
        params: MlpParams,
        learning_rate: float,
        weight_decay: float = 0.0,
    ) -> "AdamState":
        if learning_rate <= 0:
            raise InvalidParameterError(f"learning rate must be positive, got {learning_rate}")
        if weight_decay < 0:
            raise InvalidParameterError(f"weight decay must be nonnegative, got {weight_decay}")
        return cls(
            learning_rate=learning_rate,
            weight_decay=weight_decay,
            m=_zeros_like_params(params),
            v=_zeros_like_params(params),
        )


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState) -> MlpParams:
    """One bias-corrected adaptive-moment update. Mutates only ``state``.

    Returns fresh parameter arrays; the inputs are left untouched. Nonzero
    weight_decay adds the usual L2 term to the gradient before the moments.
    """
    if params.dims != grads.dims:
        raise ShapeError(f"gradient dims {grads.dims} != parameter dims {params.dims}")
    state.step += 1
    correction_1 = 1.0 - state.beta1**state.step
    correction_2 = 1.0 - state.beta2**state.step
    updated = {}
    for name in ("w1", "b1", "w2", "b2"):
        p = getattr(params, name)
        g = getattr(grads, name)
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = getattr(state.m, name)
        v = getattr(state.v, name)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction_1
        v_hat = v / correction_2
        updated[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return MlpParams(**updated)


def params_to_csv(params: MlpParams) -> str:
    """Serialize parameters as ``tensor,row,col,value`` rows (biases use col 0)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["tensor", "row", "col", "value"])
    for name in ("w1", "b1", "w2", "b2"):
        tensor = getattr(params, name)
        if tensor.ndim == 1:
            for i, value in enumerate(tensor):
                writer.writerow([name, i, 0, repr(float(value))])
        else:
            for i in range(tensor.shape[0]):
                for j in range(tensor.shape[1]):
                    writer.writerow([name, i, j, repr(float(tensor[i, j]))])
    return buf.getvalue()


def params_from_csv(text: str) -> MlpParams:
    """Rebuild parameters from the ``params_to_csv`` layout."""
    cells: dict[str, dict[tuple[int, int], float]] = {"w1": {}, "b1": {}, "w2": {}, "b2": {}}
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["tensor", "row", "col", "value"]:
        raise ShapeError(f"unexpected parameter CSV header {header}")
    for row in reader:
        name, i, j, value = row[0], int(row[1]), int(row[2]), float(row[3])
        if name not in cells:
            raise ShapeError(f"unknown tensor name {name!r}")
        cells[name][(i, j)] = value
    tensors = {}
    for name, entries in cells.items():
        if not entries:
            raise ShapeError(f"tensor {name!r} missing from parameter CSV")
        n_rows = max(i for i, _ in entries) + 1
        n_cols = max(j for _, j in entries) + 1
        grid = np.zeros((n_rows, n_cols))
        for (i, j), value in entries.items():
            grid[i, j] = value
        tensors[name] = grid[:, 0] if name.startswith("b") else grid
    return MlpParams(**tensors)
