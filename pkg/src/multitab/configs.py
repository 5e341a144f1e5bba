"""Run-config documents: one JSON object per run with a ``command`` field.

Validation uses JSON Schema; the first violation is reported as a
``ConfigError`` carrying a JSON pointer to the offending value.
"""
from __future__ import annotations

import json
import os

import jsonschema

from .errors import ConfigError

COMMANDS = ("generate", "train", "eval", "ablate", "bench", "gradcheck")

_int = {"type": "integer"}
_seed = {"type": "integer", "minimum": 0}
_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_str = {"type": "string"}
_bool = {"type": "boolean"}

GENERATOR = {
    "type": "object",
    "required": ["t"],
    "additionalProperties": False,
    "properties": {
        "t": {"type": "integer", "minimum": 2},
        "d": {"type": "integer", "minimum": 2},
        "correlation": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1},
                                  {"type": "array", "items": {"type": "array", "items": _num}}]},
        "degrees": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "noise_scales": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "n": {"type": "integer", "minimum": 0},
        "seed": _seed,
    },
}

LEGACY = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "d": {"type": "integer", "minimum": 2},
        "p": {"type": "number", "minimum": -1, "maximum": 1},
        "c": _num,
        "alphas": {"type": "array", "items": _num},
        "betas": {"type": "array", "items": _num},
        "noise_scale": {"type": "number", "minimum": 0},
        "n": {"type": "integer", "minimum": 0},
        "seed": _seed,
    },
}

MODEL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["multitab", "stl", "shared_bottom"]},
        "name": _str,
        "seed": _seed,
        "e": {"type": "integer", "minimum": 1},
        "heads": {"type": "integer", "minimum": 1},
        "blocks": {"type": "integer", "minimum": 1},
        "ffn_hidden": {"type": "integer", "minimum": 0},
        "mask": {"enum": ["none", "FnotT", "TnotT", "Both"]},
        "use_rope": _bool,
        "inter_sample": _bool,
        "single_token": _bool,
        "dropout_attention": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "dropout_ffn": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "head_hidden": {"oneOf": [{"type": "integer", "minimum": 0},
                                  {"type": "array", "items": {"type": "integer", "minimum": 1}}]},
        "trunk": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    },
}

TRAIN = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "learning_rate": _pos,
        "weight_decay": {"type": "number", "minimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "max_epochs": {"type": "integer", "minimum": 1},
        "patience": {"type": "integer", "minimum": 1},
        "seed": _seed,
        "task_loss_weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "standardize_numeric": _bool,
        "eval_batch_size": {"type": "integer", "minimum": 1},
        "clip_norm": {"oneOf": [_pos, {"type": "null"}]},
        "split_ratios": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
        "split_seed": _seed,
    },
}

TASKS = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["name"],
        "properties": {"name": _str, "kind": {"enum": ["binary", "multiclass", "regression"]},
                       "num_classes": _int, "lower_is_better": _bool},
    },
}

_common = {"command": {"enum": list(COMMANDS)}, "out": _str, "description": _str}

SCHEMAS = {
    "generate": {
        "type": "object",
        "oneOf": [{"required": ["generator"]}, {"required": ["legacy"]}],
        "properties": {**_common, "generator": GENERATOR, "legacy": LEGACY, "verify": _bool,
                       "verify_repeats": {"type": "integer", "minimum": 2}},
        "additionalProperties": False,
    },
    "train": {
        "type": "object",
        "required": ["dataset", "model"],
        "properties": {**_common, "dataset": _str, "model": MODEL, "train": TRAIN, "tasks": TASKS,
                       "baseline_report": _str},
        "additionalProperties": False,
    },
    "eval": {
        "type": "object",
        "required": ["checkpoint", "dataset"],
        "properties": {**_common, "checkpoint": _str, "dataset": _str, "tasks": TASKS,
                       "eval_batch_size": {"type": "integer", "minimum": 1}, "baseline_report": _str},
        "additionalProperties": False,
    },
    "ablate": {
        "type": "object",
        "required": ["dataset"],
        "properties": {**_common, "dataset": _str, "model": {**MODEL, "required": []}, "baseline_model": MODEL,
                       "train": TRAIN, "tasks": TASKS},
        "additionalProperties": False,
    },
    "bench": {
        "type": "object",
        "required": ["sweep", "models"],
        "properties": {
            **_common,
            "base": {"type": "object", "additionalProperties": False,
                     "properties": {"t": {"type": "integer", "minimum": 2}, "p": {"type": "number"},
                                    "pd": {"oneOf": [{"type": "integer", "minimum": 1},
                                                     {"type": "array", "items": {"type": "integer", "minimum": 1}}]},
                                    "d": {"type": "integer", "minimum": 2}, "n": {"type": "integer", "minimum": 10},
                                    "noise": {"type": "number", "minimum": 0}}},
            "sweep": {"type": "object", "minProperties": 1, "additionalProperties": False,
                      "properties": {"p": {"type": "array", "items": _num, "minItems": 1},
                                     "pd": {"type": "array", "minItems": 1},
                                     "t": {"type": "array", "items": {"type": "integer", "minimum": 2},
                                           "minItems": 1}}},
            "models": {"type": "array", "items": MODEL, "minItems": 1},
            "baseline_model": MODEL,
            "train": TRAIN,
            "seeds": {"type": "array", "items": _seed, "minItems": 1},
        },
        "additionalProperties": False,
    },
    "gradcheck": {
        "type": "object",
        "properties": {**_common, "model": {**MODEL, "required": []}, "d": {"type": "integer", "minimum": 1},
                       "t": {"type": "integer", "minimum": 1}, "n": {"type": "integer", "minimum": 1},
                       "seed": _seed, "step": _pos, "tolerance": _pos, "all_variants": _bool,
                       "task_kinds": {"type": "array", "items": {"enum": ["binary", "multiclass", "regression"]}},
                       "corrupt": {"type": ["string", "null"]}},
        "additionalProperties": False,
    },
}

# inputs that must exist before a command runs
READ_PATHS = {"train": ("dataset", "baseline_report"), "eval": ("checkpoint", "dataset", "baseline_report"),
              "ablate": ("dataset",)}


def _pointer(path):
    return "".join(f"/{p}" for p in path)


def validate(doc, command=None, base_dir="."):
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    command = doc.get("command", command)
    if command not in SCHEMAS:
        raise ConfigError(f"unknown or missing command {command!r}; expected one of {COMMANDS}", "/command")
    errors = sorted(jsonschema.Draft7Validator(SCHEMAS[command]).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _pointer(err.absolute_path))
    for key in READ_PATHS.get(command, ()):
        if key in doc and not os.path.exists(resolve(doc[key], base_dir)):
            raise ConfigError(f"path does not exist: {doc[key]}", f"/{key}")
    return command


def resolve(path, base_dir):
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def load(path, command=None):
    """Read and validate a config file; relative paths inside resolve against its directory."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))
    command = validate(doc, command, base)
    for key in READ_PATHS.get(command, ()):
        if key in doc:
            doc[key] = resolve(doc[key], base)
    if "out" in doc:
        doc["out"] = resolve(doc["out"], base)
    return command, doc
