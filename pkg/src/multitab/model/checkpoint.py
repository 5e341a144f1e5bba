"""Checkpoint container: a zip archive holding ``manifest.json`` plus one raw
little-endian float64 payload per array under ``params/`` (and ``adam/`` for
optimizer moments)."""
from __future__ import annotations

import hashlib
import json
import zipfile

import numpy as np

from .. import __version__
from ..errors import FormatError
from ..schema import FeatureSchema, TaskSpec
from .baselines import MLPBaseline
from .config import MLPConfig, ModelConfig
from .net import MultiTabNet

FORMAT = "multitab-checkpoint/1"
_DTYPE = "<f8"
# fixed timestamp so identical content gives identical bytes
_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


def _write(zf, name, payload):
    info = zipfile.ZipInfo(name, date_time=_ZIP_TIME)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, payload)


def _array_entries(prefix, arrays):
    return [{"name": k, "shape": list(v.shape), "file": f"{prefix}/{k}.f64"} for k, v in arrays.items()]


def build_model(kind, config, schema, tasks, seed=0, params=None):
    if kind == "multitab":
        return MultiTabNet(ModelConfig.from_json(config) if isinstance(config, dict) else config,
                           schema, tasks, seed=seed, params=params)
    if kind in ("stl", "shared_bottom"):
        if isinstance(config, dict):
            config = MLPConfig.from_json({**config, "variant": "STL" if kind == "stl" else "SharedBottom"})
        return MLPBaseline(config, schema, tasks, seed=seed, params=params)
    raise FormatError(f"unknown model kind {kind!r}")


def save_checkpoint(path, model, extra=None, optimizer=None):
    params = {k: np.asarray(v, dtype=np.float64) for k, v in model.params.items()}
    manifest = {
        "format": FORMAT,
        "artifact_version": __version__,
        "model_kind": model.kind,
        "model_config": model.config_json(),
        "seed": model.seed,
        "schema": model.schema.to_json(),
        "tasks": [task.to_json() for task in model.tasks],
        "params": _array_entries("params", params),
        "extra": extra or {},
    }
    arrays = {f"params/{k}.f64": v for k, v in params.items()}
    if optimizer is not None:
        manifest["optimizer"] = {"step": optimizer.step,
                                 "m": _array_entries("adam/m", optimizer.m),
                                 "v": _array_entries("adam/v", optimizer.v)}
        arrays.update({f"adam/m/{k}.f64": v for k, v in optimizer.m.items()})
        arrays.update({f"adam/v/{k}.f64": v for k, v in optimizer.v.items()})
    with zipfile.ZipFile(path, "w") as zf:
        _write(zf, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        for name, arr in arrays.items():
            _write(zf, name, np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())


def _read_arrays(zf, entries):
    out = {}
    for entry in entries:
        raw = zf.read(entry["file"])
        shape = tuple(entry["shape"])
        arr = np.frombuffer(raw, dtype=_DTYPE)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise FormatError(f"{entry['file']}: payload holds {arr.size} values, manifest shape {shape}")
        out[entry["name"]] = arr.reshape(shape).astype(np.float64)
    return out


def load_checkpoint(path):
    """Return ``(model, manifest, optimizer_arrays_or_None)``."""
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            if manifest.get("format") != FORMAT:
                raise FormatError(f"{path}: unsupported checkpoint format {manifest.get('format')!r}")
            params = _read_arrays(zf, manifest["params"])
            opt = None
            if "optimizer" in manifest:
                o = manifest["optimizer"]
                opt = {"step": o["step"], "m": _read_arrays(zf, o["m"]), "v": _read_arrays(zf, o["v"])}
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable checkpoint ({exc})") from exc
    schema = FeatureSchema.from_json(manifest["schema"])
    tasks = [TaskSpec.from_json(t) for t in manifest["tasks"]]
    model = build_model(manifest["model_kind"], manifest["model_config"], schema, tasks,
                        seed=manifest.get("seed", 0), params=params)
    return model, manifest, opt


def file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
