"""Implementations behind the ``multitab`` subcommands.

Each ``cmd_*`` takes a validated config document and an output directory
and returns the report dict it wrote. Reports are deterministic apart from
``provenance.timestamps``.
"""
from __future__ import annotations

import datetime
import json
import logging
import os

import numpy as np

from . import __version__
from .benchgen import (
    DATA_FILE,
    GenConfig,
    LegacyGenConfig,
    correlation_report,
    generate,
    generate_legacy_mmoe,
    load_dataset,
    mean_pairwise,
    save_dataset,
)
from .errors import ConfigError, ContractError, ToleranceFailure
from .metrics import TaskResult, multitask_gain
from .model import MaskScheme, build_model, file_digest, load_checkpoint, save_checkpoint
from .numkit import Rng, check_gradients, derive_seed
from .schema import BINARY, MULTICLASS, FeatureSchema, TaskSpec
from .train import TrainConfig, aggregate_losses, evaluate, fit, make_splits, regression_mse, task_loss
from .train.data import Standardizer

log = logging.getLogger(__name__)

REPORT_FILE = "report.json"
CHECKPOINT_FILE = "checkpoint.mtab"
LOG_FILE = "train_log.jsonl"
GRADCHECK_TOL = 1e-4

# Table-shaped ablation grid: (token mode, mask)
ABLATION_CELLS = (
    ("single", "none"), ("single", "FnotT"),
    ("multiple", "none"), ("multiple", "Both"), ("multiple", "FnotT"), ("multiple", "TnotT"),
)


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def normalize_report(doc):
    """Copy of ``doc`` without wall-clock fields, for reproducibility checks."""
    doc = json.loads(json.dumps(doc))
    doc.get("provenance", {}).pop("timestamps", None)
    return doc


def _provenance(seeds, started):
    return {"artifact_version": __version__, "seeds": seeds,
            "timestamps": {"started": started, "finished": _now()}}


def delta_from_reports(method, baseline):
    """Multitask gain between two report dicts (or their ``metrics`` lists)."""
    def results(doc):
        items = doc["metrics"] if isinstance(doc, dict) else doc
        return [TaskResult.from_json(r) for r in items]
    return multitask_gain(results(method), results(baseline))


# ------------------------------------------------------------- generate
def cmd_generate(doc, out):
    started = _now()
    if "legacy" in doc:
        cfg = LegacyGenConfig(**doc["legacy"])
        ds = generate_legacy_mmoe(cfg)
    else:
        cfg = GenConfig.from_json(doc["generator"])
        ds = generate(cfg)
    save_dataset(ds, out)
    report = {"command": "generate", "config": doc, "dataset": {"path": os.path.basename(os.path.normpath(out)),
                                                                "n": int(ds.n), "d": ds.schema.d,
                                                                "t": len(ds.tasks)},
              "data_sha256": file_digest(os.path.join(out, DATA_FILE))}
    if doc.get("verify"):
        if "legacy" in doc:
            raise ConfigError("verify is only available for the correlated generator", "/verify")
        rep = correlation_report(cfg, doc.get("verify_repeats", 10))
        corr = {"config": cfg.to_json(), "repeats": doc.get("verify_repeats", 10),
                "pairs": [{"i": i, "j": j, **v} for (i, j), v in sorted(rep.items())],
                "mean_pairwise": mean_pairwise(rep)}
        write_json(os.path.join(out, "correlation_report.json"), corr)
        report["correlation"] = {"mean_pairwise": corr["mean_pairwise"]}
    report["provenance"] = _provenance({"generator": cfg.seed}, started)
    write_json(os.path.join(out, REPORT_FILE), report)
    return report


# ------------------------------------------------------------- training
def _check_tasks(expected, actual, what):
    """Raise naming the first position where two task lists disagree."""
    for k in range(max(len(expected), len(actual))):
        a = expected[k] if k < len(expected) else None
        b = actual[k] if k < len(actual) else None
        same = a is not None and b is not None and a.name == b.name and a.kind == b.kind \
            and a.num_classes == b.num_classes
        if not same:
            show = lambda s: "<missing>" if s is None else f"{s.name}({s.kind})"
            raise ContractError(f"{what}: task list mismatch at position {k}: {show(a)} vs {show(b)}")


def _config_tasks(doc):
    return [TaskSpec.from_json({"kind": "regression", **item}) for item in doc["tasks"]]


def _model_fields(model_doc):
    return {k: v for k, v in model_doc.items() if k not in ("kind", "name", "seed")}


def new_model(model_doc, schema, tasks, default_seed):
    kind = model_doc["kind"]
    return build_model(kind, _model_fields(model_doc), schema, tasks, seed=model_doc.get("seed", default_seed))


def _train_config(doc):
    return TrainConfig.from_json(doc.get("train", {}))


def _splits(ds, cfg):
    return make_splits(ds, cfg.split_ratios, cfg.split_seed, cfg.standardize_numeric)


def train_and_save(ds, split, model_doc, cfg, out):
    """Fit one model, write checkpoint and log under ``out``; returns a summary dict."""
    os.makedirs(out, exist_ok=True)
    model = new_model(model_doc, ds.schema, ds.tasks, cfg.seed)
    result = fit(model, split, cfg, log_path=os.path.join(out, LOG_FILE))
    extra = {"split": {"ratios": list(split.ratios), "seed": split.seed,
                       "standardize_numeric": cfg.standardize_numeric},
             "scaler": split.scaler.to_json(),
             "train": cfg.to_json(),
             "best_epoch": result.best_epoch}
    ckpt = os.path.join(out, CHECKPOINT_FILE)
    save_checkpoint(ckpt, model, extra=extra, optimizer=result.optimizer)
    metrics = evaluate(model, split, cfg.eval_batch_size, "test")
    return {
        "model": model,
        "model_kind": model.kind,
        "metrics": [r.to_json() for r in metrics],
        "mse": regression_mse(model, split, cfg.eval_batch_size, "test"),
        "training": {"best_epoch": result.best_epoch, "best_monitor": result.best_monitor,
                     "epochs_run": result.epochs_run},
        "checkpoint": {"file": CHECKPOINT_FILE, "sha256": file_digest(ckpt)},
        "seed": model.seed,
    }


def _with_baseline(report, path):
    if path:
        base = read_json(path)
        report["delta_m"] = delta_from_reports(report, base).to_json()
        report["baseline"] = {"report": path, "model_kind": base.get("model_kind")}
    return report


def cmd_train(doc, out):
    started = _now()
    ds = load_dataset(doc["dataset"])
    if "tasks" in doc:
        _check_tasks(_config_tasks(doc), ds.tasks, "train")
    cfg = _train_config(doc)
    split = _splits(ds, cfg)
    run = train_and_save(ds, split, doc["model"], cfg, out)
    report = {
        "command": "train", "config": doc, "model_kind": run["model_kind"], "model_name": doc["model"].get("name"),
        "tasks": [t.name for t in ds.tasks], "split": split.split_json(), "metrics": run["metrics"],
        "mse": run["mse"], "training": run["training"], "checkpoint": run["checkpoint"],
        "dataset_sha256": file_digest(os.path.join(doc["dataset"], DATA_FILE)),
    }
    _with_baseline(report, doc.get("baseline_report"))
    report["provenance"] = _provenance({"model": run["seed"], "train": cfg.seed, "split": cfg.split_seed}, started)
    write_json(os.path.join(out, REPORT_FILE), report)
    return report


def cmd_eval(doc, out):
    started = _now()
    model, manifest, _ = load_checkpoint(doc["checkpoint"])
    ds = load_dataset(doc["dataset"])
    _check_tasks(model.tasks, ds.tasks, "eval (checkpoint vs dataset)")
    if "tasks" in doc:
        _check_tasks(_config_tasks(doc), model.tasks, "eval (config vs checkpoint)")
    if model.schema.to_json() != ds.schema.to_json():
        raise ContractError("eval: dataset feature schema differs from the checkpoint's")
    extra = manifest.get("extra", {})
    sp = extra.get("split", {})
    split = make_splits(ds, sp.get("ratios", (0.7, 0.15, 0.15)), sp.get("seed", 0),
                        sp.get("standardize_numeric", True))
    if "scaler" in extra:
        split.scaler = Standardizer.from_json(extra["scaler"])
    batch = doc.get("eval_batch_size", extra.get("train", {}).get("eval_batch_size", 1024))
    metrics = evaluate(model, split, batch, "test")
    report = {
        "command": "eval", "config": doc, "model_kind": model.kind, "tasks": [t.name for t in model.tasks],
        "split": split.split_json(), "metrics": [r.to_json() for r in metrics],
        "mse": regression_mse(model, split, batch, "test"),
        "checkpoint": {"file": os.path.basename(doc["checkpoint"]), "sha256": file_digest(doc["checkpoint"])},
        "dataset_sha256": file_digest(os.path.join(doc["dataset"], DATA_FILE)),
    }
    _with_baseline(report, doc.get("baseline_report"))
    report["provenance"] = _provenance({"model": model.seed, "split": split.seed}, started)
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, REPORT_FILE), report)
    return report


# -------------------------------------------------------------- ablation
DEFAULT_BASELINE = {"kind": "stl"}
DEFAULT_MULTITAB = {"kind": "multitab", "e": 16, "heads": 4, "blocks": 2}


def _fmt_table(header, rows):
    lines = ["# " + " ".join(header)]
    lines += [" ".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_ablate(doc, out):
    started = _now()
    ds = load_dataset(doc["dataset"])
    if "tasks" in doc:
        _check_tasks(_config_tasks(doc), ds.tasks, "ablate")
    cfg = _train_config(doc)
    split = _splits(ds, cfg)
    base_doc = {**DEFAULT_MULTITAB, **doc.get("model", {}), "kind": "multitab"}
    stl_doc = doc.get("baseline_model", DEFAULT_BASELINE)
    os.makedirs(out, exist_ok=True)
    # the baseline is trained once; every cell is scored against this checkpoint
    stl = train_and_save(ds, split, stl_doc, cfg, os.path.join(out, "baseline"))
    stl_hash = stl["checkpoint"]["sha256"]
    rows = []
    for tokens, mask in ABLATION_CELLS:
        cell_doc = {**base_doc, "single_token": tokens == "single", "mask": mask}
        tag = f"{tokens}_{MaskScheme.parse(mask).value}"
        run = train_and_save(ds, split, cell_doc, cfg, os.path.join(out, tag))
        gain = delta_from_reports(run, stl)
        rows.append({"tokens": tokens, "mask": mask, "delta_m": gain.delta_m, "per_task_delta": list(gain.per_task),
                     "metrics": run["metrics"], "training": run["training"], "checkpoint": run["checkpoint"],
                     "baseline_sha256": file_digest(os.path.join(out, "baseline", CHECKPOINT_FILE))})
    report = {"command": "ablate", "config": doc, "tasks": [t.name for t in ds.tasks],
              "baseline": {"model_kind": stl["model_kind"], "metrics": stl["metrics"],
                           "checkpoint": {"file": f"baseline/{CHECKPOINT_FILE}", "sha256": stl_hash},
                           "trainings": 1},
              "rows": rows, "split": split.split_json(),
              "provenance": _provenance({"model": base_doc.get("seed", cfg.seed), "train": cfg.seed,
                                         "split": cfg.split_seed}, started)}
    with open(os.path.join(out, "ablation.txt"), "w") as fh:
        fh.write(_fmt_table(["tokens", "mask", "delta_m"],
                            [(r["tokens"], r["mask"], f"{r['delta_m']:.6f}") for r in rows]))
    write_json(os.path.join(out, REPORT_FILE), report)
    return report


# ----------------------------------------------------------------- bench
BENCH_BASE = {"t": 3, "p": 0.6, "pd": 3, "d": 32, "n": 10_000, "noise": 0.01}
SWEEP_AXES = ("p", "pd", "t")


def sweep_axis(sweep):
    axes = [k for k in SWEEP_AXES if k in sweep]
    if len(axes) != 1:
        raise ConfigError(f"a sweep varies exactly one of {SWEEP_AXES}, got {axes}", "/sweep")
    return axes[0]


def bench_point(base, axis, value):
    """GenConfig fields for one sweep point (seed filled in by the caller)."""
    point = {**base, axis: value}
    t, pd = point["t"], point["pd"]
    degrees = [int(pd)] * t if np.ndim(pd) == 0 else [int(k) for k in pd]
    if len(degrees) != t:
        raise ConfigError(f"degree list {degrees} does not match t={t}", f"/sweep/{axis}" if axis != "p" else "/base/pd")
    return {"t": t, "d": point["d"], "correlation": float(point["p"]), "degrees": degrees,
            "noise_scales": [float(point["noise"])] * t, "n": point["n"]}


def standard_error(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return float("nan")
    return float(values.std(ddof=1) / np.sqrt(values.size))


def _point_label(value):
    return json.dumps(value, separators=(",", ":"))


def cmd_bench(doc, out):
    started = _now()
    axis = sweep_axis(doc["sweep"])
    base = {**BENCH_BASE, **doc.get("base", {})}
    seeds = doc.get("seeds", [0, 1])
    cfg0 = _train_config(doc)
    stl_doc = doc.get("baseline_model", DEFAULT_BASELINE)
    names = [m.get("name", f"{m['kind']}{k}") for k, m in enumerate(doc["models"])]
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique", "/models")
    points = []
    for pi, value in enumerate(doc["sweep"][axis]):
        gen = bench_point(base, axis, value)
        per_model = {name: [] for name in names}
        for seed in seeds:
            ds = generate(GenConfig(**gen, seed=derive_seed(seed, pi)))
            cfg = TrainConfig.from_json({**cfg0.to_json(), "seed": seed, "split_seed": seed})
            split = _splits(ds, cfg)
            run_dir = os.path.join(out, f"point{pi}", f"seed{seed}")
            stl = train_and_save(ds, split, {**stl_doc, "seed": seed}, cfg, os.path.join(run_dir, "baseline"))
            for name, mdoc in zip(names, doc["models"]):
                run = train_and_save(ds, split, {**mdoc, "seed": seed}, cfg, os.path.join(run_dir, name))
                per_model[name].append(delta_from_reports(run, stl).delta_m)
        points.append({"index": pi, "axis": axis, "value": value, "generator": gen,
                       "models": {name: {"delta_m": vals, "mean_delta_m": float(np.mean(vals)),
                                         "stderr": standard_error(vals)} for name, vals in per_model.items()}})
    rows = [(name, axis, _point_label(p["value"]), f"{p['models'][name]['mean_delta_m']:.6f}",
             f"{p['models'][name]['stderr']:.6f}", len(seeds)) for name in names for p in points]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "curves.txt"), "w") as fh:
        fh.write(_fmt_table(["model", "axis", "value", "mean_delta_m", "stderr", "seeds"], rows))
    report = {"command": "bench", "config": doc, "axis": axis, "base": base, "seeds": seeds, "points": points,
              "provenance": _provenance({"runs": seeds, "dataset": "derive_seed(seed, point_index)"}, started)}
    write_json(os.path.join(out, REPORT_FILE), report)
    return report


# -------------------------------------------------------------- gradcheck
GRADCHECK_MODEL = {"kind": "multitab", "e": 4, "heads": 2, "blocks": 1}


def _gradcheck_task(kind, i):
    if kind == MULTICLASS:
        return TaskSpec(f"y{i}", MULTICLASS, 3)
    return TaskSpec(f"y{i}", kind)


def gradcheck_model(model_doc, d, t, n, seed, task_kinds=None, step=1e-5, corrupt=None):
    """Max relative gradient error per parameter of a freshly initialised model."""
    kinds = task_kinds or ["regression", BINARY][:t] + ["regression"] * max(0, t - 2)
    if len(kinds) != t:
        raise ConfigError(f"task_kinds lists {len(kinds)} kinds for t={t}", "/task_kinds")
    tasks = [_gradcheck_task(k, i) for i, k in enumerate(kinds)]
    schema = FeatureSchema.numeric(d)
    model = build_model(model_doc["kind"], _model_fields(model_doc), schema, tasks, seed=seed)
    rng = Rng(derive_seed(seed, 7))
    x = rng.normal((n, d))
    y = np.empty((n, t))
    for i, task in enumerate(tasks):
        y[:, i] = rng.integers(0, task.output_dim if task.kind == MULTICLASS else 2, n) \
            if task.kind != "regression" else rng.normal(n)
    targets = [y[:, i].astype(np.intp) if task.kind != "regression" else y[:, i] for i, task in enumerate(tasks)]
    if corrupt is not None and corrupt not in model.params:
        raise ConfigError(f"corrupt names unknown parameter {corrupt!r}", "/corrupt")

    def loss_fn(params):
        outs = model.forward(x, params=params)
        return aggregate_losses([task_loss(o, tg, task) for o, tg, task in zip(outs, targets, tasks)], None)

    return check_gradients(loss_fn, model.params, step=step, corrupt=corrupt)


def cmd_gradcheck(doc, out):
    started = _now()
    model_doc = {**GRADCHECK_MODEL, **doc.get("model", {})}
    tol = doc.get("tolerance", GRADCHECK_TOL)
    variants = [(model_doc.get("mask", "TnotT"), model_doc.get("use_rope", False))]
    if doc.get("all_variants"):
        variants = [(m.value, r) for m in MaskScheme for r in (False, True)]
    results = []
    worst = (None, -1.0)
    for mask, rope in variants:
        errors = gradcheck_model({**model_doc, "mask": mask, "use_rope": rope}, doc.get("d", 3), doc.get("t", 2),
                                 doc.get("n", 3), doc.get("seed", 0), doc.get("task_kinds"),
                                 doc.get("step", 1e-5), doc.get("corrupt"))
        name, err = max(errors.items(), key=lambda kv: kv[1])
        if err > worst[1]:
            worst = (f"{name} (mask={mask}, rope={rope})", err)
        results.append({"mask": mask, "use_rope": rope, "max_rel_error": errors, "worst": name,
                        "passed": err <= tol})
    passed = all(r["passed"] for r in results)
    report = {"command": "gradcheck", "config": doc, "tolerance": tol, "variants": results, "passed": passed,
              "worst": {"group": worst[0], "rel_error": worst[1]},
              "provenance": _provenance({"model": doc.get("seed", 0)}, started)}
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, REPORT_FILE), report)
    if not passed:
        raise ToleranceFailure(f"gradient check failed: worst group {worst[0]} rel error {worst[1]:.3e} > {tol:g}")
    return report


COMMAND_TABLE = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate,
                 "bench": cmd_bench, "gradcheck": cmd_gradcheck}
