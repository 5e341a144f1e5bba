"""The multitask masked-attention transformer."""
from __future__ import annotations

import numpy as np
from scipy.special import expit, softmax

from ..numkit import Rng
from ..numkit import tensor as T
from ..schema import REGRESSION
from . import layers as L
from .config import ModelConfig


def as_tensors(params):
    return {k: v if isinstance(v, T.Tensor) else T.Tensor(v) for k, v in params.items()}


def num_task_tokens(config, tasks):
    return 1 if config.single_token else len(tasks)


def init_params(config, schema, tasks, seed):
    """Fresh parameter arrays (name -> float64 ndarray) in a stable order."""
    rng = Rng(seed)
    t_tok = num_task_tokens(config, tasks)
    config.check_tokens(schema.d, t_tok)
    params = {}
    L.init_embedding(params, rng, schema, config.e)
    params["task_tokens"] = rng.normal((t_tok, config.e), config.token_init_std)
    for b in range(config.blocks):
        L.init_encoder_block(params, rng, config, schema.d + t_tok, f"block{b}")
    L.init_layernorm(params, config.e, "final_ln")
    for i, task in enumerate(tasks):
        if config.head_hidden:
            L.init_linear(params, rng, config.e, config.head_hidden, f"head{i}.fc1")
            L.init_linear(params, rng, config.head_hidden, task.output_dim, f"head{i}.out")
        else:
            L.init_linear(params, rng, config.e, task.output_dim, f"head{i}.out")
    return params


def task_head(h, params, prefix, hidden):
    if hidden:
        h = T.gelu(L.linear(h, params, f"{prefix}.fc1"))
    return L.linear(h, params, f"{prefix}.out")


def forward(batch, params, config, schema, tasks, rng=None, strict=False, return_tokens=False):
    """Per-task predictions for a raw feature batch.

    Binary tasks get one logit, multiclass(k) k logits, regression one value.
    ``rng`` enables dropout (training); ``strict`` rejects unseen categories.
    """
    params = as_tensors(params)
    n = np.asarray(batch).shape[0]
    d = schema.d
    t_tok = num_task_tokens(config, tasks)
    feats = L.embed(batch, schema, params, strict=strict)
    tokens = T.broadcast_to(params["task_tokens"].reshape(1, t_tok, config.e), (n, t_tok, config.e))
    x = T.concat([feats, tokens], axis=1)
    mask = L.expand_mask(config.mask, d, t_tok)
    for b in range(config.blocks):
        x = L.encoder_block(x, params, config, mask, f"block{b}", rng=rng)
    task_out = L.layernorm(x[:, d:, :], params, "final_ln", config.ln_eps)
    preds = []
    for i in range(len(tasks)):
        tok = task_out[:, 0 if config.single_token else i, :]
        preds.append(task_head(tok, params, f"head{i}", config.head_hidden))
    return (preds, x) if return_tokens else preds


class MultiTabNet:
    """Parameter container bound to a config, feature schema and task list."""

    kind = "multitab"

    def __init__(self, config, schema, tasks, seed=0, params=None):
        self.config = config if isinstance(config, ModelConfig) else ModelConfig.from_json(config)
        self.schema = schema
        self.tasks = list(tasks)
        self.seed = seed
        self.params = params if params is not None else init_params(self.config, schema, self.tasks, seed)

    def forward(self, batch, params=None, rng=None, strict=False):
        return forward(batch, self.params if params is None else params, self.config, self.schema,
                       self.tasks, rng=rng, strict=strict)

    __call__ = forward

    def predict(self, batch):
        """Numpy predictions: probabilities for classification, values for regression."""
        out = []
        for task, logits in zip(self.tasks, self.forward(batch)):
            out.append(postprocess(task, logits.data))
        return out

    def config_json(self):
        return self.config.to_json()


def postprocess(task, raw):
    if task.kind == REGRESSION:
        return raw[:, 0]
    if task.output_dim == 1:
        return expit(raw[:, 0])
    return softmax(raw, axis=1)
