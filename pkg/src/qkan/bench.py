"""Benchmark tasks, metrics and the experiment harness."""
from __future__ import annotations

import csv
import json
import statistics
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np
from sklearn.datasets import make_circles, make_moons

from .baseline import GdConfig, lr_sweep, train_gd
from .encoding import EncodingSpec
from .network import DecodedModel, KanSpec, forward_batch
from .objective import Dataset, ObjectiveConfig
from .reduction import DEFAULT_W_FACTOR, reduce
from .session import Normalizer, add_samples, build_state, retrain
from .solver import AnnealSchedule, brute_force

TASKS = ("circle", "moons", "reg1", "reg2_sph", "reg3")
CLASSIFICATION = ("circle", "moons")
ANNEAL_ARMS = ("sa", "exact")
GD_ARMS = ("adam", "sgd", "adagrad")

# fixed sampling boxes for the regression tasks
_BOXES = {
    "reg1": ((-1.0, -1.0), (1.0, 1.0)),
    "reg2_sph": ((0.0, 0.0), (np.pi, 2 * np.pi)),
    "reg3": ((0.0, 0.0), (1.0, 1.0)),
}


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    name: str
    n_train: int = 10_000
    n_val: int = 0
    n_test: int = 1_000
    noise: float = 0.0
    seed: int = 0
    kan: KanSpec | None = None
    encoding: EncodingSpec = EncodingSpec()

    def __post_init__(self):
        if self.name not in TASKS:
            raise ValueError(f"unknown task {self.name!r}; choose from {TASKS}")

    @property
    def kind(self) -> str:
        return "classification" if self.name in CLASSIFICATION else "regression"

    def to_dict(self) -> dict:
        return {"name": self.name, "n_train": self.n_train, "n_val": self.n_val, "n_test": self.n_test,
                "noise": self.noise, "seed": self.seed,
                "kan": self.kan.to_dict() if self.kan else None, "encoding": self.encoding.to_dict()}


def default_task(name: str, **overrides) -> TaskSpec:
    """Desk-scale defaults for each task."""
    base = {
        "circle": dict(noise=0.05, kan=KanSpec.uniform((2, 1), 2)),
        "moons": dict(noise=0.1, kan=KanSpec.uniform((2, 1), 2)),
        "reg1": dict(kan=KanSpec.per_layer((2, 1, 1), [2, 1]), encoding=EncodingSpec(-2, 1, False)),
        "reg2_sph": dict(kan=KanSpec.per_layer((2, 1, 1), [2, 1]), encoding=EncodingSpec(-2, 1, False)),
        "reg3": dict(kan=KanSpec.per_layer((2, 1, 1), [[1, 2], 1]), encoding=EncodingSpec(-2, 1, False)),
    }[name]
    base.update(overrides)
    return TaskSpec(name, **base)


@dataclass
class TaskData:
    task: TaskSpec
    train: Dataset
    val: Dataset | None
    test: Dataset
    bounds: Normalizer
    extra_seed: np.random.SeedSequence = field(repr=False, default=None)

    def norm(self, ds: Dataset | None) -> Dataset | None:
        if ds is None:
            return None
        return Dataset(self.bounds.transform(ds.inputs, strict=False), ds.targets, ds.kind)

    def batches(self, k: int, m: int) -> list[Dataset]:
        """``k`` fresh raw training batches of ``m`` samples from a dedicated seed stream."""
        base = self.extra_seed
        # explicit spawn keys keep repeated calls identical (spawn() is stateful)
        seqs = [np.random.SeedSequence(base.entropy, spawn_key=base.spawn_key + (i,)) for i in range(k)]
        return [_sample(self.task, m, s, "train") for s in seqs]


def _rng_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def _sample(task: TaskSpec, n: int, seq: np.random.SeedSequence, kind: str) -> Dataset:
    if n == 0:
        return Dataset(np.zeros((0, 2)), np.zeros((0, 1)), kind)
    if task.name == "circle":
        X, y = make_circles(n, noise=task.noise, factor=0.5, random_state=_rng_int(seq))
        return Dataset(X, y.astype(float), kind)
    if task.name == "moons":
        X, y = make_moons(n, noise=task.noise, random_state=_rng_int(seq))
        return Dataset(X, y.astype(float), kind)
    rng = np.random.default_rng(seq)
    lo, hi = _BOXES[task.name]
    X = rng.uniform(lo, hi, size=(n, 2))
    return Dataset(X, regression_target(task.name, X[:, 0], X[:, 1]), kind)


def regression_target(name: str, a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if name == "reg1":
        return 3 * a / (np.exp(b) + np.exp(-b))
    if name == "reg2_sph":
        # real spherical harmonic Y_1^0(theta, phi); independent of phi
        return 0.5 * np.sqrt(3 / np.pi) * np.cos(a)
    if name == "reg3":
        return 2 * np.sqrt(1 + a ** 2 + b ** 2)
    raise ValueError(name)


def generate(task: TaskSpec) -> TaskData:
    s_train, s_val, s_test, s_extra = np.random.SeedSequence(task.seed).spawn(4)
    train = _sample(task, task.n_train, s_train, "train")
    val = _sample(task, task.n_val, s_val, "validation") if task.n_val else None
    test = _sample(task, task.n_test, s_test, "test")
    if task.name in _BOXES:
        bounds = Normalizer(*_BOXES[task.name])
    else:
        bounds = Normalizer.fit(train.inputs, test.inputs, *([val.inputs] if val else []))
    return TaskData(task, train, val, test, bounds, s_extra)


# -- metrics -------------------------------------------------------------------

def metrics(pred, truth, kind: str) -> dict[str, float]:
    pred = np.asarray(pred, float).ravel()
    truth = np.asarray(truth, float).ravel()
    if pred.size == 0:
        raise MetricError("empty input")
    if pred.size != truth.size:
        raise MetricError("prediction and truth lengths differ")
    if kind == "classification":
        p = pred >= 0.5
        t = truth >= 0.5
        tp = int(np.sum(p & t))
        fp = int(np.sum(p & ~t))
        fn = int(np.sum(~p & t))
        tn = int(np.sum(~p & ~t))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        return {"accuracy": (tp + tn) / pred.size, "precision": prec, "recall": rec, "f1": f1,
                "tp": tp, "fp": fp, "fn": fn, "tn": tn}
    if kind == "regression":
        mse = float(np.mean((pred - truth) ** 2))
        ss_tot = float(np.sum((truth - truth.mean()) ** 2))
        if ss_tot == 0.0:
            raise MetricError("R^2 undefined for zero-variance truth")
        return {"mse": mse, "r2": 1.0 - float(np.sum((pred - truth) ** 2)) / ss_tot}
    raise ValueError(f"unknown metric kind {kind!r}")


def evaluate_model(model: DecodedModel, data: Dataset, kind: str) -> dict[str, float]:
    pred = forward_batch(model.spec, model.control_points, data.inputs)[:, 0]
    return metrics(pred, data.targets[:, 0], kind)


# -- harness -------------------------------------------------------------------

@dataclass
class HarnessConfig:
    gd: GdConfig = field(default_factory=GdConfig)
    lr_sweep: bool = False
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    w_factor: float = DEFAULT_W_FACTOR
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    polish: bool = True
    repeats: int = 1
    retrain_rounds: int = 0
    retrain_batch: int = 1_000


def _median_timing(fn, repeats: int):
    times, out = [], None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def _anneal_arm(arm, data: TaskData, cfg: HarnessConfig):
    task = data.task
    solver = "sa" if arm == "sa" else "exact"

    def once():
        t0 = time.perf_counter()
        state = build_state(task.kan, task.encoding, data.train, data.val, cfg.objective, data.bounds)
        t1 = time.perf_counter()
        model, rep = retrain(state, solver, cfg.schedule, cfg.w_factor, cfg.polish and solver == "sa")
        t2 = time.perf_counter()
        return state, model, rep, {"preprocess": t1 - t0, **rep.timings, "total": t2 - t0}

    runs = [once() for _ in range(max(1, cfg.repeats))]
    state, model, rep, _ = runs[-1]
    timing = {k: statistics.median(r[3][k] for r in runs) for k in runs[-1][3]}
    row = {
        "arm": arm,
        "timing": timing,
        "qubits": rep.qubits,
        "aux": len(rep.qubo.registry),
        "hubo_terms": rep.hubo_terms,
        "energy": rep.result.best_energy,
        "aux_violations": rep.result.aux_violations,
        "metrics": evaluate_model(model, data.norm(data.test), task.kind),
        "model": model.to_dict(),
    }
    rounds = []
    for b, batch in enumerate(data.batches(cfg.retrain_rounds, cfg.retrain_batch) if cfg.retrain_rounds else []):
        t0 = time.perf_counter()
        state = add_samples(state, batch)
        t1 = time.perf_counter()
        model, rep = retrain(state, solver, cfg.schedule, cfg.w_factor, cfg.polish and solver == "sa")
        t2 = time.perf_counter()
        rounds.append({"round": b + 1, "n_train": state.n_train,
                       "timing": {"preprocess": t1 - t0, **rep.timings, "total": t2 - t0},
                       "metrics": evaluate_model(model, data.norm(data.test), task.kind)})
    if rounds:
        row["retrain"] = rounds
    return row


def _gd_arm(arm, data: TaskData, cfg: HarnessConfig):
    task = data.task
    gcfg = replace(cfg.gd, optimizer=arm)
    train, val = data.norm(data.train), data.norm(data.val)
    low, high = np.asarray(data.bounds.low), np.asarray(data.bounds.high)

    def once():
        if cfg.lr_sweep:
            return lr_sweep(task.kan, task.encoding, train, val, gcfg, bounds_low=low, bounds_high=high)
        return train_gd(task.kan, task.encoding, train, val, gcfg, bounds_low=low, bounds_high=high)

    res, total = _median_timing(once, cfg.repeats)
    row = {
        "arm": arm,
        "learning_rate": res.learning_rate,
        "timing": {"total": total, "per_step": total / gcfg.steps},
        "final_train_mse": res.train_mse[-1],
        "metrics": evaluate_model(res.model, data.norm(data.test), task.kind),
        "trace": [list(r) for r in res.trace_rows()],
        "model": res.model.to_dict(),
    }
    rounds = []
    model = res.model
    cum = data.train
    for b, batch in enumerate(data.batches(cfg.retrain_rounds, cfg.retrain_batch) if cfg.retrain_rounds else []):
        cum = Dataset.concat(cum, batch)
        c = replace(gcfg, learning_rate=res.learning_rate or gcfg.learning_rate)
        t0 = time.perf_counter()
        r = train_gd(task.kan, task.encoding, data.norm(cum), val, c, init=model)
        rounds.append({"round": b + 1, "n_train": cum.n, "timing": {"total": time.perf_counter() - t0},
                       "metrics": evaluate_model(r.model, data.norm(data.test), task.kind)})
        model = r.model
    if rounds:
        row["retrain"] = rounds
    return row


def _run_arm(arm, data, cfg) -> dict:
    try:
        if arm in ANNEAL_ARMS:
            return _anneal_arm(arm, data, cfg)
        if arm in GD_ARMS:
            return _gd_arm(arm, data, cfg)
        raise ValueError(f"unknown arm {arm!r}")
    except Exception as exc:  # keep going with the remaining arms
        return {"arm": arm, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc(limit=3)}


def run_experiment(task: TaskSpec, arms: Iterable[str], out_dir=None, cfg: HarnessConfig | None = None,
                   parallel: bool = False) -> dict:
    """Train every arm on identical data and write ``report.json`` plus ``metrics.csv``.

    Arms run one after another unless ``parallel`` is set (timings are then
    contaminated by contention).
    """
    cfg = cfg or HarnessConfig()
    data = generate(task)
    report = {"task": task.to_dict(), "kind": task.kind, "config": _cfg_dict(cfg), "arms": []}
    arms = list(arms)
    if parallel:
        with ThreadPoolExecutor(max_workers=len(arms) or 1) as pool:
            report["arms"] = list(pool.map(lambda a: _run_arm(a, data, cfg), arms))
    else:
        report["arms"] = [_run_arm(a, data, cfg) for a in arms]
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _cfg_dict(cfg: HarnessConfig) -> dict:
    return {"gd": cfg.gd.to_dict(), "lr_sweep": cfg.lr_sweep, "schedule": cfg.schedule.to_dict(),
            "w_factor": cfg.w_factor, "objective": cfg.objective.to_dict(), "polish": cfg.polish,
            "repeats": cfg.repeats, "retrain_rounds": cfg.retrain_rounds, "retrain_batch": cfg.retrain_batch}


def write_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, default=float))
    rows = []
    for r in report["arms"]:
        if "error" in r:
            rows.append({"arm": r["arm"], "error": r["error"]})
            continue
        rows.append({"arm": r["arm"], **{k: v for k, v in r["metrics"].items()},
                     **{f"time_{k}": v for k, v in r["timing"].items()}})
    keys = sorted({k for r in rows for k in r}, key=lambda k: (k != "arm", k))
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
    for r in report["arms"]:
        if "trace" in r:
            with open(out / f"trace_{r['arm']}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["step", "train_mse", "val_mse"])
                w.writerows(r["trace"])


def degree_sweep(degrees=(1, 2), runs: int = 50, seed: int = 0, reads: int = 20, sweeps: int = 1000,
                 w_factor: float = DEFAULT_W_FACTOR, polish: bool = True, out_dir=None,
                 task: TaskSpec | None = None) -> dict:
    """Repeat seeded annealing on reg3 for each first-edge degree; the QUBO is built once per degree."""
    task = task or default_task("reg3", seed=seed)
    data = generate(task)
    test = data.norm(data.test)
    report = {"task": task.to_dict(), "runs": runs, "reads": reads, "sweeps": sweeps, "settings": []}
    for d in degrees:
        kan = KanSpec.per_layer((2, 1, 1), [[d, 2], 1])
        state = build_state(kan, task.encoding, data.train, data.val, ObjectiveConfig(), data.bounds)
        mses, r2s, energies = [], [], []
        t0 = time.perf_counter()
        for r in range(runs):
            sched = AnnealSchedule(sweeps=sweeps, reads=reads, seed=seed * 1_000_003 + r * reads)
            model, rep = retrain(state, "sa", sched, w_factor, polish)
            m = evaluate_model(model, test, "regression")
            mses.append(m["mse"])
            r2s.append(m["r2"])
            energies.append(rep.result.best_energy)
        best = int(np.argmin(mses))
        report["settings"].append({
            "degrees": [d, 2, 1], "qubits": rep.qubits, "mse": mses, "r2": r2s, "energy": energies,
            "best": {"run": best, "mse": mses[best], "r2": r2s[best]},
            "seconds": time.perf_counter() - t0,
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "degree_sweep.json").write_text(json.dumps(report, indent=2))
        with open(out / "degree_sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bottom_degree", "run", "mse", "r2", "energy"])
            for s in report["settings"]:
                for r, (a, b, e) in enumerate(zip(s["mse"], s["r2"], s["energy"])):
                    w.writerow([s["degrees"][0], r, a, b, e])
    return report


def small_instances() -> list[tuple[str, TaskSpec]]:
    """One tiny configuration per task (<= 20 QUBO variables) for exhaustive cross-checks."""
    tiny = EncodingSpec(0, 0, False)
    small = dict(n_train=200, n_test=50)
    return [
        ("circle-[2,1]-d2-2bit", default_task("circle", kan=KanSpec.uniform((2, 1), 2),
                                              encoding=EncodingSpec(-1, 0, False), **small)),
        ("moons-[2,1]-d2-signed", default_task("moons", kan=KanSpec.uniform((2, 1), 2),
                                               encoding=EncodingSpec(-1, -1, True), **small)),
        ("reg1-[2,1,1]-d1-1bit", default_task("reg1", kan=KanSpec.uniform((2, 1, 1), 1), encoding=tiny, **small)),
        ("reg2-[2,1,1]-d1-1bit", default_task("reg2_sph", kan=KanSpec.uniform((2, 1, 1), 1), encoding=tiny, **small)),
        ("reg3-[2,1,1]-d1-1bit", default_task("reg3", kan=KanSpec.uniform((2, 1, 1), 1), encoding=tiny, **small)),
    ]


def exact_optimum(task: TaskSpec, w_factor: float = DEFAULT_W_FACTOR):
    """Reduced QUBO of ``task`` and its brute-force minimum."""
    data = generate(task)
    state = build_state(task.kan, task.encoding, data.train, data.val, ObjectiveConfig(), data.bounds)
    layout = state.layout()
    q = reduce(state.objective().compress(), w_factor, first_aux=layout.total_bits, variables=layout.bit_ids())
    return q, brute_force(q)
