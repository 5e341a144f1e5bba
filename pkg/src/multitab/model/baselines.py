"""MLP baselines: independent single-task networks (STL) and shared-bottom MTL.

Both embed inputs with the same per-feature embedding as the transformer and
flatten the n x d x e tokens to n x (d*e).
"""
from __future__ import annotations

from ..numkit import Rng, derive_seed
from ..numkit import tensor as T
from . import layers as L
from .config import MLPConfig
from .net import as_tensors, postprocess


def _init_stack(params, rng, widths, prefix):
    for k in range(len(widths) - 1):
        L.init_linear(params, rng, widths[k], widths[k + 1], f"{prefix}{k}")


def _stack(h, params, count, prefix):
    for k in range(count):
        h = T.gelu(L.linear(h, params, f"{prefix}{k}"))
    return h


def init_params(config, schema, tasks, seed):
    params = {}
    flat = schema.d * config.e
    trunk = [flat] + list(config.trunk)
    if config.variant == "STL":
        for i, task in enumerate(tasks):
            rng = Rng(derive_seed(seed, i))
            L.init_embedding(params, rng, schema, config.e, prefix=f"task{i}.embed")
            _init_stack(params, rng, trunk, f"task{i}.trunk")
            L.init_linear(params, rng, trunk[-1], task.output_dim, f"task{i}.out")
        return params
    rng = Rng(derive_seed(seed, 0))
    L.init_embedding(params, rng, schema, config.e)
    _init_stack(params, rng, trunk, "trunk")
    head = [trunk[-1]] + list(config.head_hidden)
    for i, task in enumerate(tasks):
        _init_stack(params, rng, head, f"head{i}.fc")
        L.init_linear(params, rng, head[-1], task.output_dim, f"head{i}.out")
    return params


def mlp_forward(batch, params, config, schema, tasks, strict=False):
    params = as_tensors(params)
    n = len(batch)
    depth = len(config.trunk)
    if config.variant == "STL":
        preds = []
        for i in range(len(tasks)):
            h = L.embed(batch, schema, params, prefix=f"task{i}.embed", strict=strict)
            h = _stack(h.reshape(n, -1), params, depth, f"task{i}.trunk")
            preds.append(L.linear(h, params, f"task{i}.out"))
        return preds
    h = L.embed(batch, schema, params, strict=strict).reshape(n, -1)
    h = _stack(h, params, depth, "trunk")
    preds = []
    for i in range(len(tasks)):
        g = _stack(h, params, len(config.head_hidden), f"head{i}.fc")
        preds.append(L.linear(g, params, f"head{i}.out"))
    return preds


class MLPBaseline:
    def __init__(self, config, schema, tasks, seed=0, params=None):
        self.config = config if isinstance(config, MLPConfig) else MLPConfig.from_json(config)
        self.schema = schema
        self.tasks = list(tasks)
        self.seed = seed
        self.params = params if params is not None else init_params(self.config, schema, self.tasks, seed)

    @property
    def kind(self):
        return "stl" if self.config.variant == "STL" else "shared_bottom"

    def param_groups(self):
        """Parameter names per independently-clipped group (one per task for STL)."""
        if self.config.variant != "STL":
            return [list(self.params)]
        return [[k for k in self.params if k.startswith(f"task{i}.")] for i in range(len(self.tasks))]

    def forward(self, batch, params=None, rng=None, strict=False):
        return mlp_forward(batch, self.params if params is None else params, self.config, self.schema,
                           self.tasks, strict=strict)

    __call__ = forward

    def predict(self, batch):
        return [postprocess(task, out.data) for task, out in zip(self.tasks, self.forward(batch))]

    def config_json(self):
        return self.config.to_json()
