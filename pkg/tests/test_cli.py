import json
import math

import numpy as np
import pytest

from multitab.cli import main
from multitab.commands import ABLATION_CELLS, delta_from_reports, normalize_report, standard_error
from multitab.model.checkpoint import file_digest

TINY_MULTITAB = {"kind": "multitab", "e": 4, "heads": 2, "blocks": 1}
TINY_TRAIN = {"max_epochs": 2, "patience": 2, "batch_size": 32, "learning_rate": 3e-3, "eval_batch_size": 64}


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def run(tmp_path, name, doc, out=None):
    cfg = write_config(tmp_path / f"{name}.json", doc)
    argv = [doc["command"], "--config", cfg] + (["--out", str(out)] if out else [])
    return main(argv)


def report(path):
    return json.loads((path / "report.json").read_text())


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    doc = {"command": "generate", "generator": {"t": 2, "d": 5, "degrees": [1, 2], "n": 400, "seed": 3}}
    assert run(root, "gen", doc, root / "ds") == 0
    return root / "ds"


@pytest.fixture(scope="module")
def stl_run(dataset, tmp_path_factory):
    root = tmp_path_factory.mktemp("stl")
    doc = {"command": "train", "dataset": str(dataset), "model": {"kind": "stl", "e": 4, "trunk": [8, 4]},
           "train": TINY_TRAIN}
    assert run(root, "stl", doc, root / "out") == 0
    return root / "out"


# ------------------------------------------------------------ generate
def test_generate_default_shape_and_rerun(tmp_path):
    doc = {"command": "generate",
           "generator": {"t": 3, "correlation": 0.6, "degrees": [3, 3, 3], "n": 10_000, "seed": 7}}
    assert run(tmp_path, "a", doc, tmp_path / "a") == 0
    first, first_report = (tmp_path / "a" / "data.csv").read_bytes(), report(tmp_path / "a")
    assert run(tmp_path, "a", doc, tmp_path / "a") == 0
    lines = (tmp_path / "a" / "data.csv").read_text().splitlines()
    assert len(lines) == 10_001 and len(lines[0].split(",")) == 35
    assert (tmp_path / "a" / "data.csv").read_bytes() == first
    assert normalize_report(report(tmp_path / "a")) == normalize_report(first_report)


def test_generate_verify_linear(tmp_path):
    doc = {"command": "generate", "verify": True, "verify_repeats": 3,
           "generator": {"t": 2, "correlation": 0.5, "degrees": [1, 1], "noise_scales": [0, 0], "n": 20_000,
                         "seed": 1}}
    assert run(tmp_path, "v", doc, tmp_path / "v") == 0
    corr = json.loads((tmp_path / "v" / "correlation_report.json").read_text())
    assert abs(corr["mean_pairwise"] - 0.5) < 0.02


def test_generate_legacy(tmp_path):
    doc = {"command": "generate", "legacy": {"d": 6, "p": 1.0, "c": 1.0, "noise_scale": 0.0, "n": 50, "seed": 0}}
    assert run(tmp_path, "l", doc, tmp_path / "l") == 0
    assert report(tmp_path / "l")["dataset"]["t"] == 2


# ------------------------------------------------------- config errors
@pytest.mark.parametrize("doc, pointer", [
    ({"command": "generate", "generator": {"t": 1}}, "/generator/t"),
    ({"command": "generate", "generator": {"t": 2, "n": "many"}}, "/generator/n"),
    ({"command": "train", "dataset": "missing_dir", "model": {"kind": "stl"}}, "/dataset"),
    ({"command": "train", "dataset": ".", "model": {"kind": "forest"}}, "/model/kind"),
    ({"command": "bench", "sweep": {"p": [0.2], "t": [2, 3]}, "models": [{"kind": "stl"}]}, "/sweep"),
])
def test_config_errors_exit_2_with_pointer(tmp_path, capsys, doc, pointer):
    assert run(tmp_path, "bad", doc, tmp_path / "o") == 2
    assert f"config error: {pointer}: " in capsys.readouterr().err


def test_unreadable_and_mismatched_configs(tmp_path):
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["generate", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2
    cfg = write_config(tmp_path / "g.json", {"command": "generate", "generator": {"t": 2, "n": 5}})
    assert main(["train", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert main(["generate", "--config", cfg]) == 2  # no output directory anywhere


# ------------------------------------------------------- train / eval
def test_train_stl_has_no_gain(stl_run):
    rep = report(stl_run)
    assert "delta_m" not in rep and rep["model_kind"] == "stl"
    assert [m["task"] for m in rep["metrics"]] == ["y0", "y1"]
    assert (stl_run / "checkpoint.mtab").exists() and (stl_run / "train_log.jsonl").exists()
    assert rep["checkpoint"]["sha256"] == file_digest(stl_run / "checkpoint.mtab")


def test_train_multitab_with_baseline_then_eval(dataset, stl_run, tmp_path):
    doc = {"command": "train", "dataset": str(dataset), "model": {**TINY_MULTITAB, "mask": "TnotT"},
           "train": TINY_TRAIN, "baseline_report": str(stl_run / "report.json")}
    assert run(tmp_path, "mt", doc, tmp_path / "mt") == 0
    trained = report(tmp_path / "mt")
    assert math.isfinite(trained["delta_m"]["delta_m"])

    ev = {"command": "eval", "checkpoint": str(tmp_path / "mt" / "checkpoint.mtab"), "dataset": str(dataset),
          "baseline_report": str(tmp_path / "mt" / "report.json")}
    assert run(tmp_path, "ev", ev, tmp_path / "ev") == 0
    evaluated = report(tmp_path / "ev")
    assert evaluated["metrics"] == trained["metrics"]
    assert evaluated["delta_m"]["delta_m"] == 0.0


def test_eval_task_mismatch_names_position(dataset, stl_run, tmp_path, capsys):
    ev = {"command": "eval", "checkpoint": str(stl_run / "checkpoint.mtab"), "dataset": str(dataset),
          "tasks": [{"name": "y0"}, {"name": "income", "kind": "binary"}]}
    assert run(tmp_path, "ev", ev, tmp_path / "ev") == 1
    assert "position 1" in capsys.readouterr().err


def test_train_is_reproducible(dataset, tmp_path):
    doc = {"command": "train", "dataset": str(dataset), "model": TINY_MULTITAB, "train": TINY_TRAIN}
    assert run(tmp_path, "a", doc, tmp_path / "a") == 0
    a = normalize_report(report(tmp_path / "a"))
    assert run(tmp_path, "a", doc, tmp_path / "a") == 0
    b = normalize_report(report(tmp_path / "a"))
    assert a == b
    assert set(a["provenance"]) == {"artifact_version", "seeds"}


def fixture_report(values):
    return {"metrics": [{"task": n, "metric": "AUC", "value": v} for n, v in zip(("click", "conv"), values)]}


def test_fixture_report_pair_gain(tmp_path):
    stl, ours = fixture_report([0.7207, 0.8567]), fixture_report([0.7257, 0.8602])
    assert abs(delta_from_reports(ours, stl).delta_m - 0.5512) < 1e-4
    assert delta_from_reports(stl, stl).delta_m == 0.0


# --------------------------------------------------------------- ablate
def test_ablate_grid_shares_one_baseline(dataset, tmp_path):
    doc = {"command": "ablate", "dataset": str(dataset), "model": TINY_MULTITAB,
           "baseline_model": {"kind": "stl", "e": 4, "trunk": [8]}, "train": {**TINY_TRAIN, "max_epochs": 1}}
    assert run(tmp_path, "ab", doc, tmp_path / "ab") == 0
    rep = report(tmp_path / "ab")
    assert [(r["tokens"], r["mask"]) for r in rep["rows"]] == list(ABLATION_CELLS)
    assert all(math.isfinite(r["delta_m"]) for r in rep["rows"])
    disk = file_digest(tmp_path / "ab" / "baseline" / "checkpoint.mtab")
    assert {r["baseline_sha256"] for r in rep["rows"]} == {disk} == {rep["baseline"]["checkpoint"]["sha256"]}
    table = (tmp_path / "ab" / "ablation.txt").read_text().splitlines()
    assert table[0].startswith("#") and len(table) == 7


# ---------------------------------------------------------------- bench
BENCH_TINY = {"base": {"t": 2, "d": 4, "n": 200, "pd": 1}, "models": [{**TINY_MULTITAB, "name": "mt"}],
              "baseline_model": {"kind": "stl", "e": 4, "trunk": [8]}, "train": {**TINY_TRAIN, "max_epochs": 1},
              "seeds": [0, 1]}


def test_bench_correlation_sweep(tmp_path):
    doc = {"command": "bench", "sweep": {"p": [0.2, 0.6, 1.0]}, **BENCH_TINY}
    assert run(tmp_path, "b", doc, tmp_path / "b") == 0
    rep = report(tmp_path / "b")
    assert [p["value"] for p in rep["points"]] == [0.2, 0.6, 1.0]
    for point in rep["points"]:
        vals = point["models"]["mt"]["delta_m"]
        assert len(vals) == 2
        assert abs(point["models"]["mt"]["stderr"] - abs(vals[0] - vals[1]) / 2) < 1e-12
    rows = (tmp_path / "b" / "curves.txt").read_text().splitlines()
    assert rows[0].startswith("#") and len(rows) == 1 + 3
    assert all(len(r.split()) == 6 for r in rows[1:])


def test_bench_task_count_sweep(tmp_path):
    doc = {"command": "bench", "sweep": {"t": [2, 3]}, **BENCH_TINY, "seeds": [0]}
    assert run(tmp_path, "t", doc, tmp_path / "t") == 0
    points = report(tmp_path / "t")["points"]
    assert [len(p["generator"]["degrees"]) for p in points] == [2, 3]
    assert math.isnan(points[0]["models"]["mt"]["stderr"])


def test_standard_error_oracle():
    assert standard_error([1.0, 3.0]) == pytest.approx(np.std([1.0, 3.0], ddof=1) / math.sqrt(2), abs=1e-15)
    assert math.isnan(standard_error([2.0]))


# ------------------------------------------------------------ gradcheck
@pytest.mark.parametrize("rope", [False, True])
def test_gradcheck_passes(tmp_path, rope):
    doc = {"command": "gradcheck", "model": {"use_rope": rope, "mask": "Both"}}
    assert run(tmp_path, "g", doc, tmp_path / "g") == 0
    assert report(tmp_path / "g")["passed"] is True


def test_gradcheck_corruption_exits_4(tmp_path, capsys):
    doc = {"command": "gradcheck", "corrupt": "block0.feat.wq"}
    assert run(tmp_path, "g", doc, tmp_path / "g") == 4
    assert "block0.feat.wq" in capsys.readouterr().err
    assert report(tmp_path / "g")["worst"]["group"].startswith("block0.feat.wq")
