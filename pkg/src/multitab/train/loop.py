"""Training driver with early stopping on the averaged validation metric."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ContractError, NumericFailure
from ..metrics import TaskResult, auc_binary, auc_multiclass, explained_variance, mse
from ..numkit import Rng, Tensor, backward, derive_seed
from ..schema import BINARY, MULTICLASS, REGRESSION
from .data import DEFAULT_RATIOS, batches
from .objectives import AdamState, adam_step, aggregate_losses, clip_global_norm, task_loss

log = logging.getLogger(__name__)

_SHUFFLE_STREAM = 1
_DROPOUT_STREAM = 2


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 256
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    task_loss_weights: list = None
    standardize_numeric: bool = True
    eval_batch_size: int = 1024
    clip_norm: float = 10.0
    split_ratios: list = field(default_factory=lambda: list(DEFAULT_RATIOS))
    split_seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ContractError("patience must be >= 1")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ContractError("batch sizes must be >= 1")
        if self.max_epochs < 1:
            raise ContractError("max_epochs must be >= 1")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, item):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in item.items() if k in known})


class EarlyStopping:
    """Tracks the best (highest) monitor; ``update`` returns True when to stop."""

    def __init__(self, patience):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = None
        self.stale = 0

    def update(self, epoch, monitor):
        if monitor > self.best:
            self.best, self.best_epoch, self.stale = monitor, epoch, 0
            return False
        self.stale += 1
        return self.stale >= self.patience


@dataclass
class FitResult:
    params: dict
    best_epoch: int
    best_monitor: float
    log: list
    optimizer: AdamState
    epochs_run: int


def _needs_batch_context(model):
    return getattr(model, "kind", "") == "multitab" and model.config.inter_sample


def _uses_dropout(model):
    cfg = model.config
    return getattr(cfg, "dropout_attention", 0.0) > 0 or getattr(cfg, "dropout_ffn", 0.0) > 0


def _targets_for(task, column):
    return column.astype(np.intp) if task.kind in (BINARY, MULTICLASS) else column


def score_predictions(preds, targets, tasks):
    """Primary metric per task: AUC for classification, EV for regression."""
    out = []
    for i, task in enumerate(tasks):
        pred, y = preds[i], targets[:, i]
        try:
            if task.kind == REGRESSION:
                value = explained_variance(pred, y)
            elif task.kind == BINARY:
                value = auc_binary(pred, y.astype(np.intp))
            else:
                value = auc_multiclass(pred, y.astype(np.intp))
        except Exception as exc:
            raise type(exc)(f"task {task.name!r}: {exc}") from exc
        out.append(TaskResult(task.name, task.metric, value, task.lower_is_better))
    return out


def predict_split(model, split, name, eval_batch_size):
    """Original-scale predictions for one split, batch by batch in index order."""
    x, _, raw = split.part(name)
    chunks = [[] for _ in model.tasks]
    for idx in batches(len(x), eval_batch_size):
        for i, p in enumerate(model.predict(x[idx])):
            chunks[i].append(p)
    preds = []
    for i, task in enumerate(model.tasks):
        p = np.concatenate(chunks[i], axis=0)
        if task.kind == REGRESSION:
            p = split.scaler.unscale_target(i, p)
        preds.append(p)
    return preds, raw


def evaluate(model, split, eval_batch_size=1024, name="test"):
    preds, raw = predict_split(model, split, name, eval_batch_size)
    return score_predictions(preds, raw, model.tasks)


def regression_mse(model, split, eval_batch_size=1024, name="test"):
    preds, raw = predict_split(model, split, name, eval_batch_size)
    return {task.name: mse(preds[i], raw[:, i]) for i, task in enumerate(model.tasks) if task.kind == REGRESSION}


def monitor_value(results):
    return float(np.mean([r.value for r in results]))


def train_step(model, xb, yb, config, state, rng=None):
    """Forward, backward and one Adam update; returns (params, state, losses, clipped)."""
    leaves = {k: Tensor(v, requires_grad=True) for k, v in model.params.items()}
    outs = model.forward(xb, params=leaves, rng=rng, strict=True)
    losses = [task_loss(o, _targets_for(task, yb[:, i]), task) for i, (o, task) in enumerate(zip(outs, model.tasks))]
    total = aggregate_losses(losses, config.task_loss_weights)
    if not np.isfinite(total.data):
        raise NumericFailure("non-finite training loss")
    backward(total)
    grads = {k: t.grad for k, t in leaves.items() if t.grad is not None}
    groups = model.param_groups() if hasattr(model, "param_groups") else [list(grads)]
    clipped = False
    for names in groups:
        part, _, hit = clip_global_norm({k: grads[k] for k in names if k in grads}, config.clip_norm)
        grads.update(part)
        clipped |= hit
    params, state = adam_step(model.params, grads, state, config.learning_rate, config.weight_decay)
    return params, state, [l.item() for l in losses], clipped


def fit(model, split, config, log_path=None):
    """Train ``model`` in place; leaves the best-validation parameters on it."""
    if min(len(split.train), len(split.val)) == 0:
        raise ContractError("fit: empty train or validation split")
    if _needs_batch_context(model) and config.batch_size < 2:
        raise ContractError("fit: inter-sample attention needs batch_size >= 2")
    x_train, y_train, _ = split.part("train")
    state = AdamState.zeros_like(model.params)
    stopper = EarlyStopping(config.patience)
    best_params = model.params
    records = []
    min_batch = 2 if _needs_batch_context(model) else 1
    dropout = _uses_dropout(model)
    log_fh = open(log_path, "w") if log_path else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            start = time.perf_counter()
            order = Rng(derive_seed(config.seed, _SHUFFLE_STREAM, epoch)).permutation(len(x_train))
            drop_rng = Rng(derive_seed(config.seed, _DROPOUT_STREAM, epoch)) if dropout else None
            sums = np.zeros(len(model.tasks))
            count, clips = 0, 0
            for idx in batches(len(x_train), config.batch_size, order, min_batch):
                params, state, losses, clipped = train_step(model, x_train[idx], y_train[idx], config, state,
                                                            drop_rng)
                model.params = params
                sums += losses
                count += 1
                clips += clipped
            if clips:
                log.info("epoch %d: gradient clipping triggered on %d batches", epoch, clips)
            val = evaluate(model, split, config.eval_batch_size, "val")
            monitor = monitor_value(val)
            stop = stopper.update(epoch, monitor)
            if stopper.best_epoch == epoch:
                best_params = model.params
            record = {
                "epoch": epoch,
                "train_loss": {t.name: float(s / count) for t, s in zip(model.tasks, sums)},
                "val_metric": {r.task: r.value for r in val},
                "monitor": monitor,
                "clipped_batches": int(clips),
                "wall_ms": round(1000.0 * (time.perf_counter() - start), 3),
            }
            records.append(record)
            if log_fh:
                log_fh.write(json.dumps(record, sort_keys=True) + "\n")
                log_fh.flush()
            log.info("epoch %d monitor %.6f", epoch, monitor)
            if stop:
                break
    finally:
        if log_fh:
            log_fh.close()
    model.params = best_params
    return FitResult(best_params, stopper.best_epoch, stopper.best, records, state, len(records))
