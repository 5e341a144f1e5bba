"""Per-task losses, loss aggregation and Adam with L2-coupled weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, NumericFailure
from ..numkit import tensor as T
from ..schema import BINARY, MULTICLASS


def task_loss(pred, target, task):
    """BCE-from-logits, softmax cross-entropy or MSE, averaged over the batch."""
    if not np.all(np.isfinite(pred.data)):
        raise NumericFailure(f"non-finite predictions for task {task.name!r}")
    if task.kind == BINARY:
        return T.bce_with_logits(pred, target)
    if task.kind == MULTICLASS:
        return T.cross_entropy(pred, target)
    return T.mse_loss(pred, target)


def aggregate_losses(losses, weights=None):
    losses = list(losses)
    weights = [1.0] * len(losses) if weights is None else [float(w) for w in weights]
    if len(weights) != len(losses):
        raise ContractError(f"{len(losses)} losses but {len(weights)} weights")
    if any(w < 0 for w in weights):
        raise ContractError("loss weights must be non-negative")
    total = losses[0] * weights[0]
    for loss, w in zip(losses[1:], weights[1:]):
        total = total + loss * w
    return total


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params, grads, state, lr, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; decay is added to the gradient first.

    Returns new ``(params, state)``; inputs are left untouched.
    """
    step = state.step + 1
    new_params, m_out, v_out = {}, {}, {}
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if weight_decay:
            g = g + weight_decay * p
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        new_params[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        m_out[name], v_out[name] = m, v
    return new_params, AdamState(m_out, v_out, step)


def clip_global_norm(grads, max_norm):
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns ``(grads, pre_clip_norm, clipped)``.
    """
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if not np.isfinite(total):
        raise NumericFailure("non-finite gradient norm")
    if max_norm is None or total <= max_norm:
        return grads, total, False
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}, total, True
