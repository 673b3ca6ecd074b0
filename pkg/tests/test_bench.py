import json

import numpy as np
import pytest

from qkan.baseline import GdConfig
from qkan.bench import (
    HarnessConfig,
    MetricError,
    TaskSpec,
    default_task,
    degree_sweep,
    exact_optimum,
    generate,
    metrics,
    regression_target,
    run_experiment,
    small_instances,
)
from qkan.encoding import EncodingSpec
from qkan.network import KanSpec
from qkan.solver import AnnealSchedule

FAST = AnnealSchedule(sweeps=200, reads=10, seed=0)


def test_unknown_task():
    with pytest.raises(ValueError):
        TaskSpec("spiral")


def test_regression_targets():
    assert regression_target("reg1", 0.0, 0.7) == 0.0
    assert regression_target("reg3", 0.0, 0.0) == 2.0
    assert regression_target("reg1", 1.0, 0.0) == pytest.approx(1.5)
    assert regression_target("reg2_sph", 0.0, 1.0) == pytest.approx(0.5 * np.sqrt(3 / np.pi))
    assert regression_target("reg2_sph", np.pi / 2, 0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("name", ["circle", "moons", "reg1", "reg2_sph", "reg3"])
def test_generation_is_deterministic_and_normalized(name):
    t = default_task(name, n_train=300, n_val=50, n_test=100, seed=5)
    a, b = generate(t), generate(t)
    assert np.array_equal(a.train.inputs, b.train.inputs) and np.array_equal(a.test.targets, b.test.targets)
    for ds in (a.train, a.val, a.test):
        z = a.norm(ds).inputs
        assert z.min() >= 0.0 and z.max() <= 1.0
    # disjoint seed streams: no shared rows between splits
    tr = {tuple(r) for r in a.train.inputs}
    assert not tr & {tuple(r) for r in a.test.inputs}
    assert not tr & {tuple(r) for r in a.val.inputs}
    assert not np.array_equal(generate(default_task(name, n_train=300, seed=6)).train.inputs[:5], a.train.inputs[:5])


def test_circle_without_noise_is_separable_by_radius():
    d = generate(default_task("circle", noise=0.0, n_train=400, n_test=10))
    r = np.linalg.norm(d.train.inputs, axis=1)
    y = d.train.targets[:, 0]
    assert r[y == 1].max() < r[y == 0].min()


def test_regression_data_follow_formula():
    d = generate(default_task("reg3", n_train=50, n_test=5))
    X = d.train.inputs
    assert np.allclose(d.train.targets[:, 0], 2 * np.sqrt(1 + X[:, 0] ** 2 + X[:, 1] ** 2))
    assert d.bounds.low == (0.0, 0.0) and d.bounds.high == (1.0, 1.0)


def test_retrain_batches_are_fresh():
    d = generate(default_task("reg1", n_train=100, n_test=10))
    b1, b2 = d.batches(2, 30)
    assert b1.n == 30 and not np.array_equal(b1.inputs, b2.inputs)
    assert np.array_equal(d.batches(2, 30)[1].inputs, b2.inputs)


def test_metrics_perfect_and_mean():
    y = np.array([0, 1, 1, 0, 1.0])
    m = metrics(y, y, "classification")
    assert (m["accuracy"], m["precision"], m["recall"], m["f1"]) == (1.0, 1.0, 1.0, 1.0)
    t = np.array([1.0, 2.0, 4.0])
    assert metrics(t, t, "regression") == {"mse": 0.0, "r2": 1.0}
    assert metrics(np.full(3, t.mean()), t, "regression")["r2"] == pytest.approx(0.0, abs=1e-15)


def test_metrics_hand_confusion_matrix():
    pred = np.array([0.9, 0.6, 0.2, 0.7, 0.1, 0.4, 0.8, 0.3])
    truth = np.array([1, 0, 1, 1, 0, 0, 0, 1])
    # thresholded: 1 1 0 1 0 0 1 0 -> TP 2 (idx 0,3), FP 2 (1,6), FN 2 (2,7), TN 2 (4,5)
    m = metrics(pred, truth, "classification")
    assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (2, 2, 2, 2)
    assert m["accuracy"] == 0.5 and m["precision"] == 0.5 and m["recall"] == 0.5 and m["f1"] == 0.5


def test_metrics_errors():
    with pytest.raises(MetricError):
        metrics([], [], "regression")
    with pytest.raises(MetricError):
        metrics([1.0], [1.0, 2.0], "regression")
    with pytest.raises(MetricError):
        metrics([1.0, 2.0], [3.0, 3.0], "regression")


def test_small_instances_fit_brute_force():
    for name, task in small_instances():
        q, r = exact_optimum(task)
        assert q.n_vars <= 20, name
        assert r.aux_violations == 0


def test_exact_arm_reports_global_optimum(tmp_path):
    name, task = small_instances()[0]
    q, r = exact_optimum(task)
    rep = run_experiment(task, ["exact"], tmp_path)
    assert rep["arms"][0]["energy"] == pytest.approx(r.best_energy)
    assert (tmp_path / "report.json").exists() and (tmp_path / "metrics.csv").exists()


def test_circle_arms_share_test_split(tmp_path):
    task = default_task("circle", n_train=500, n_test=200)
    cfg = HarnessConfig(gd=GdConfig(steps=100, learning_rate=0.1), schedule=FAST)
    rep = run_experiment(task, ["sa", "adam"], tmp_path, cfg)
    rows = {r["arm"]: r for r in rep["arms"]}
    assert set(rows) == {"sa", "adam"}
    for r in rows.values():
        m = r["metrics"]
        assert m["tp"] + m["fp"] + m["fn"] + m["tn"] == 200
        assert r["model"]["bounds"] == rows["sa"]["model"]["bounds"]
    assert {"preprocess", "solve", "total"} <= set(rows["sa"]["timing"])
    assert {"total", "per_step"} <= set(rows["adam"]["timing"])
    assert (tmp_path / "trace_adam.csv").read_text().startswith("step,train_mse,val_mse")
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["task"]["name"] == "circle"


def test_failing_arm_does_not_stop_others():
    task = default_task("moons", n_train=200, n_test=50)
    rep = run_experiment(task, ["bogus", "exact", "adagrad"],
                         cfg=HarnessConfig(gd=GdConfig(steps=20)))
    rows = {r["arm"]: r for r in rep["arms"]}
    assert "error" in rows["bogus"]
    assert "TooManyVariablesError" in rows["exact"]["error"]  # 36 bits is beyond exhaustive search
    assert "metrics" in rows["adagrad"]


def test_retraining_protocol_rounds():
    task = default_task("reg3", n_train=500, n_test=100)
    cfg = HarnessConfig(gd=GdConfig(steps=20), schedule=FAST, retrain_rounds=2, retrain_batch=100)
    rep = run_experiment(task, ["sa", "sgd"], cfg=cfg)
    for r in rep["arms"]:
        assert [x["n_train"] for x in r["retrain"]] == [600, 700]
        assert "r2" in r["retrain"][-1]["metrics"]


def test_degree_sweep_report(tmp_path):
    task = default_task("reg3", n_train=300, n_test=100)
    rep = degree_sweep((1, 2), runs=3, reads=3, sweeps=100, out_dir=tmp_path, task=task)
    assert [s["degrees"] for s in rep["settings"]] == [[1, 2, 1], [2, 2, 1]]
    for s in rep["settings"]:
        assert len(s["mse"]) == len(s["r2"]) == 3
        assert s["best"]["mse"] == min(s["mse"])
    lines = (tmp_path / "degree_sweep.csv").read_text().splitlines()
    assert lines[0] == "bottom_degree,run,mse,r2,energy" and len(lines) == 7
