"""Deterministic training loop with sparse (straight-through) and dense paths.

Per epoch the loop: refreshes the requested sparsity and per-layer thresholds,
iterates seeded mini-batches (thresholded forward, reverse-mode backward,
pruned-gradient scaling, SGD update), evaluates top-1 on the validation split
using the thresholded weights (the deployed network), and snapshots the masks.

Reproducibility contract: (config, seed, dataset) determines every emitted
number bitwise. Data order, parameter init, and the learning-rate path are all
derived from the config seed (see :mod:`featherprune.seeding`); reductions
happen in fixed order. ``train_dense`` is an independent no-pruning loop that
shares the same seed streams, so a run with final sparsity 0 and theta 1 is
bit-identical to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import MaskSnapshot, stability_curve
from .backbones import (
    BackboneKind,
    SparsitySchedule,
    assign_thresholds,
    cubic_sparsity,
    measured_sparsity,
)
from .errors import NonFiniteError, TrainingDivergedError
from .feather import GradScalePolicy, PruneLayerState, feather_backward, feather_forward, select_theta
from .models import Model
from .seeding import epoch_permutation
from .tensor import Tape, Tensor, softmax_cross_entropy
from .thresholding import ThresholdOperator, apply_threshold

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "RunMetrics",
    "TrainResult",
    "cosine_lr",
    "sgd_step",
    "train",
    "train_dense",
    "evaluate_top1",
]

METRICS_HEADER = "epoch,train_loss,val_top1,achieved_sparsity,lr,theta,mask_pearson_vs_final"


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    lr: float
    momentum: float = 0.9
    weight_decay: float = 0.0
    label_smoothing: float = 0.0
    seed: int = 0
    schedule: SparsitySchedule = field(default_factory=lambda: SparsitySchedule(0.0, 1))
    backbone: BackboneKind = field(default_factory=BackboneKind)
    operator: ThresholdOperator = field(default_factory=lambda: ThresholdOperator.power(3.0))
    grad_policy: GradScalePolicy = field(default_factory=GradScalePolicy)
    lr_warmup_epochs: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        for name in ("lr", "weight_decay", "label_smoothing"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0 <= self.lr_warmup_epochs < self.epochs:
            raise ValueError("lr warmup must be shorter than the run")
        if self.schedule.total_epochs != self.epochs:
            raise ValueError(
                f"schedule spans {self.schedule.total_epochs} epochs, run has {self.epochs}"
            )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_top1: float
    achieved_sparsity: float
    lr: float
    theta: float
    mask_pearson_vs_final: float


@dataclass
class RunMetrics:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [METRICS_HEADER]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.train_loss!r},{r.val_top1!r},{r.achieved_sparsity!r},"
                f"{r.lr!r},{r.theta!r},{r.mask_pearson_vs_final!r}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @staticmethod
    def from_csv(text: str) -> "RunMetrics":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != METRICS_HEADER:
            raise ValueError("unrecognized metrics CSV header")
        records = []
        for ln in lines[1:]:
            parts = ln.split(",")
            records.append(EpochRecord(
                epoch=int(parts[0]),
                train_loss=float(parts[1]),
                val_top1=float(parts[2]),
                achieved_sparsity=float(parts[3]),
                lr=float(parts[4]),
                theta=float(parts[5]),
                mask_pearson_vs_final=float(parts[6]),
            ))
        return RunMetrics(records)


@dataclass
class TrainResult:
    metrics: RunMetrics
    snapshots: list[MaskSnapshot]
    theta: float
    states: list[PruneLayerState]


def cosine_lr(step: int, total_steps: int, base_lr: float, warmup_steps: int = 0) -> float:
    """Cosine-annealed learning rate with an optional linear warmup from 0."""
    if total_steps < 1:
        raise ValueError(f"total steps must be >= 1, got {total_steps}")
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    if not 0 <= warmup_steps < total_steps:
        raise ValueError(f"warmup steps {warmup_steps} must be < total {total_steps}")
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    span = total_steps - warmup_steps
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * (step - warmup_steps) / span))


def sgd_step(weights: np.ndarray, grad: np.ndarray, momentum_buffer: np.ndarray,
             lr: float, momentum: float, weight_decay: float) -> None:
    """One in-place SGD-with-momentum update.

    Weight decay acts on the dense weights and is added to the (already
    scaled) loss gradient before momentum accumulation.
    """
    if grad.shape != weights.shape or momentum_buffer.shape != weights.shape:
        raise ValueError(
            f"shape mismatch: weights {weights.shape}, grad {grad.shape}, "
            f"buffer {momentum_buffer.shape}"
        )
    if weight_decay != 0.0:
        g = grad + weight_decay * weights
    else:
        g = grad
    momentum_buffer *= np.float32(momentum)
    momentum_buffer += g
    weights -= np.float32(lr) * momentum_buffer


def evaluate_top1(model: Model, x: np.ndarray, y: np.ndarray, batch_size: int,
                  weight_overrides: Optional[dict] = None) -> float:
    """Top-1 accuracy over a dataset, evaluated without gradient recording."""
    correct = 0
    for start in range(0, len(x), batch_size):
        xb = Tensor(x[start : start + batch_size])
        logits = model.forward(xb, weight_overrides)
        pred = logits.data.argmax(axis=1)
        correct += int((pred == y[start : start + batch_size]).sum())
    return correct / len(x)


def _layer_norms(model: Model) -> dict[str, float]:
    return {layer.name: float(np.linalg.norm(layer.weight.data)) for layer in model.layers}


def _sparse_eval_state(pairs) -> tuple[dict, dict[str, np.ndarray]]:
    overrides: dict = {}
    masks: dict[str, np.ndarray] = {}
    for layer, state in pairs:
        pruned, mask = apply_threshold(state.weights.data, state.threshold, state.op)
        overrides[id(layer)] = Tensor(pruned)
        masks[state.name] = mask
    return overrides, masks


def _fill_pearson(records: list[EpochRecord], snapshots: list[MaskSnapshot]) -> None:
    for record, (_, r) in zip(records, stability_curve(snapshots)):
        record.mask_pearson_vs_final = r


def train(config: TrainConfig, model: Model, dataset) -> TrainResult:
    """Sparse training under the configured backbone, operator, and policy."""
    pairs = [
        (layer, PruneLayerState(layer.name, layer.kind, layer.weight, config.operator,
                                prunable=layer.prunable))
        for layer in model.layers
    ]
    states = [state for _, state in pairs]
    theta = select_theta(config.grad_policy, config.schedule.final_sparsity)
    for state in states:
        state.theta = theta

    params = model.parameters()
    buffers = {id(p): np.zeros_like(p.data) for p in params}
    n_train = len(dataset.train_x)
    steps_per_epoch = math.ceil(n_train / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    warmup_steps = config.lr_warmup_epochs * steps_per_epoch

    metrics = RunMetrics()
    snapshots: list[MaskSnapshot] = []
    step = 0
    for epoch in range(config.epochs):
        requested = cubic_sparsity(epoch, config.schedule)
        assign_thresholds(states, requested, config.backbone)
        achieved = measured_sparsity(states)
        epoch_lr = cosine_lr(step, total_steps, config.lr, warmup_steps)

        perm = epoch_permutation(config.seed, epoch, n_train)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, n_train, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            lr_t = cosine_lr(step, total_steps, config.lr, warmup_steps)
            try:
                with Tape() as tape:
                    overrides = {}
                    sparse_tensors = []
                    for layer, state in pairs:
                        w_tilde = feather_forward(state)
                        overrides[id(layer)] = w_tilde
                        sparse_tensors.append((state, w_tilde))
                    logits = model.forward(Tensor(dataset.train_x[idx]), overrides)
                    loss = softmax_cross_entropy(logits, dataset.train_y[idx],
                                                 config.label_smoothing)
                    tape.backward(loss)
            except NonFiniteError as exc:
                raise TrainingDivergedError(epoch, batch_index, _layer_norms(model)) from exc
            for state, w_tilde in sparse_tensors:
                feather_backward(state, w_tilde.grad)
            for param in params:
                sgd_step(param.data, param.grad, buffers[id(param)],
                         lr_t, config.momentum, config.weight_decay)
                param.grad = None
            loss_sum += loss.item() * len(idx)
            step += 1

        eval_overrides, masks = _sparse_eval_state(pairs)
        val_top1 = evaluate_top1(model, dataset.val_x, dataset.val_y,
                                 config.batch_size, eval_overrides)
        snapshots.append(MaskSnapshot(epoch, masks))
        metrics.records.append(EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n_train,
            val_top1=val_top1,
            achieved_sparsity=achieved,
            lr=epoch_lr,
            theta=theta,
            mask_pearson_vs_final=1.0,
        ))

    _fill_pearson(metrics.records, snapshots)
    # Re-select thresholds on the settled weights so the returned state (and
    # any checkpoint built from it) is self-consistent: its masks are exactly
    # the thresholds applied to the final weights, at the same quantile the
    # last epoch recorded.
    assign_thresholds(states, cubic_sparsity(config.epochs - 1, config.schedule),
                      config.backbone)
    for _, state in pairs:
        _, state.mask = apply_threshold(state.weights.data, state.threshold, state.op)
    return TrainResult(metrics, snapshots, theta, states)


def train_dense(config: TrainConfig, model: Model, dataset) -> TrainResult:
    """Plain dense training; the reference loop for the zero-sparsity case."""
    params = model.parameters()
    buffers = {id(p): np.zeros_like(p.data) for p in params}
    n_train = len(dataset.train_x)
    steps_per_epoch = math.ceil(n_train / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    warmup_steps = config.lr_warmup_epochs * steps_per_epoch

    metrics = RunMetrics()
    step = 0
    for epoch in range(config.epochs):
        epoch_lr = cosine_lr(step, total_steps, config.lr, warmup_steps)
        perm = epoch_permutation(config.seed, epoch, n_train)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, n_train, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            lr_t = cosine_lr(step, total_steps, config.lr, warmup_steps)
            try:
                with Tape() as tape:
                    logits = model.forward(Tensor(dataset.train_x[idx]))
                    loss = softmax_cross_entropy(logits, dataset.train_y[idx],
                                                 config.label_smoothing)
                    tape.backward(loss)
            except NonFiniteError as exc:
                raise TrainingDivergedError(epoch, batch_index, _layer_norms(model)) from exc
            for param in params:
                sgd_step(param.data, param.grad, buffers[id(param)],
                         lr_t, config.momentum, config.weight_decay)
                param.grad = None
            loss_sum += loss.item() * len(idx)
            step += 1

        val_top1 = evaluate_top1(model, dataset.val_x, dataset.val_y, config.batch_size)
        metrics.records.append(EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n_train,
            val_top1=val_top1,
            achieved_sparsity=0.0,
            lr=epoch_lr,
            theta=1.0,
            mask_pearson_vs_final=1.0,
        ))

    return TrainResult(metrics, [], 1.0, [])
