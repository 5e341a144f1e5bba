"""Evaluation metrics and the multitask gain.

Metrics are raw fractions; ``TaskResult.percent`` gives the x100 value used
in report tables. Multiclass AUC is macro-averaged one-vs-rest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError, UndefinedMetricError


@dataclass(frozen=True)
class TaskResult:
    task: str
    metric: str  # "AUC" | "EV" | "MSE"
    value: float
    lower_is_better: bool = False

    @property
    def percent(self):
        return 100.0 * self.value

    def to_json(self):
        return {"task": self.task, "metric": self.metric, "value": self.value,
                "lower_is_better": self.lower_is_better}

    @classmethod
    def from_json(cls, item):
        return cls(item["task"], item["metric"], float(item["value"]), bool(item.get("lower_is_better", False)))


@dataclass(frozen=True)
class MultitaskGain:
    delta_m: float          # percent
    per_task: tuple         # percent, same order as the task list

    def to_json(self):
        return {"delta_m": self.delta_m, "per_task": list(self.per_task)}


def auc_binary(scores, labels):
    """ROC AUC via the Mann-Whitney rank statistic; tied scores count 1/2."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ContractError(f"auc: {scores.size} scores vs {labels.size} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auc: labels contain a single class")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_multiclass(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    present = np.unique(labels)
    if present.size < 2:
        raise UndefinedMetricError("auc_multiclass: fewer than 2 classes present")
    return float(np.mean([auc_binary(scores[:, int(k)], labels == k) for k in present]))


def explained_variance(pred, target):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.size < 2 or pred.shape != target.shape:
        raise ContractError("explained_variance: need >= 2 paired samples")
    var = target.var()
    if var == 0.0:
        raise UndefinedMetricError("explained_variance: target has zero variance")
    return float(1.0 - (target - pred).var() / var)


def mse(pred, target):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.size == 0 or pred.shape != target.shape:
        raise ContractError("mse: empty or mismatched inputs")
    return float(np.mean((pred - target) ** 2))


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ContractError("pearson: length mismatch")
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = (da * da).sum(), (db * db).sum()
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedMetricError("pearson: zero variance input")
    # one sqrt of the product keeps pearson(a, a) exactly 1
    return float(np.clip((da * db).sum() / np.sqrt(saa * sbb), -1.0, 1.0))


def multitask_gain(method, baseline):
    """Mean signed relative change of ``method`` over ``baseline``, in percent.

    Lower-is-better tasks have the sign flipped so that a positive value is
    always an improvement.
    """
    method, baseline = list(method), list(baseline)
    if len(method) != len(baseline):
        raise ContractError(f"multitask_gain: {len(method)} vs {len(baseline)} tasks")
    deltas = []
    for m, b in zip(method, baseline):
        if m.task != b.task or m.metric != b.metric:
            raise ContractError(f"multitask_gain: task mismatch {m.task}/{m.metric} vs {b.task}/{b.metric}")
        if b.value == 0.0:
            raise ZeroDivisionError(f"multitask_gain: baseline metric for task {b.task!r} is 0")
        sign = -1.0 if b.lower_is_better else 1.0
        deltas.append(100.0 * sign * (m.value - b.value) / b.value)
    if not deltas:
        raise ContractError("multitask_gain: empty task list")
    return MultitaskGain(float(np.mean(deltas)), tuple(deltas))
