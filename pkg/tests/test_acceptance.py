"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import statistics
import time

import numpy as np
import pytest

from qkan.baseline import GdConfig, gradient, init_model
from qkan.bench import (
    HarnessConfig,
    default_task,
    degree_sweep,
    exact_optimum,
    generate,
    run_experiment,
    small_instances,
)
from qkan.encoding import EncodingSpec
from qkan.network import KanSpec, VariableLayout, decode_model, forward_batch
from qkan.objective import Dataset, ObjectiveConfig, assemble, assemble_naive
from qkan.reduction import reduce
from qkan.session import add_samples, build_state, remove_samples
from qkan.solver import AnnealSchedule, anneal

from conftest import ACCEPTANCE_LINES, MATRIX, TWO_BIT, coeffs_close, random_dataset
from test_baseline import fd_gradient


def report(num, title, ok, seconds, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {title} ({seconds:.1f}s) {detail}".rstrip()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def state_matches(a, b, rel=1e-9):
    if a.train.count != b.train.count:
        return False
    return coeffs_close(a.objective(), b.objective(), rel) and all(
        abs(x - y) <= rel * max(abs(x), abs(y)) + 1e-12 for x, y in zip(a.train.sums, b.train.sums))


def test_c01_symbolic_vs_numeric():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for spec in MATRIX.values():
        layout = VariableLayout.build(spec, TWO_BIT)
        data = random_dataset(rng, spec, 20)
        h = assemble(spec, layout, data)
        X = rng.integers(0, 2, (100, layout.total_bits))
        sym = h.evaluate_many(layout.bit_ids(), X)
        for row, s in zip(X, sym):
            m = decode_model(dict(enumerate(row.tolist())), layout)
            pred = forward_batch(spec, m.control_points, data.inputs)
            mse = float(np.mean(np.sum((data.targets - pred) ** 2, axis=1)))
            worst = max(worst, abs(s - mse) / max(abs(mse), 1e-300))
    dt = time.perf_counter() - t0
    report(1, "symbolic objective == numeric MSE", worst <= 1e-9 and dt < 10, dt, f"max rel err {worst:.2e}")


def test_c02_collapse_vs_naive():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    ok = True
    for spec in MATRIX.values():
        layout = VariableLayout.build(spec, TWO_BIT)
        for n in (1, 2, 17, 256):
            tr = random_dataset(rng, spec, n)
            va = random_dataset(rng, spec, 5, "validation")
            cfg = ObjectiveConfig(0.7)
            ok &= coeffs_close(assemble(spec, layout, tr, va, cfg), assemble_naive(spec, layout, tr, va, cfg), 1e-9)
    dt = time.perf_counter() - t0
    report(2, "collapsed moments == naive per-sample sum", ok and dt < 10, dt)


def _reduction_instances():
    one = EncodingSpec(0, 0, False)
    rng = np.random.default_rng(303)
    out = []
    for spec in (KanSpec.uniform((1, 1, 1), 1), KanSpec.uniform((2, 1, 1), 1), KanSpec.per_layer((1, 1, 1), [2, 1]),
                 KanSpec.per_layer((1, 1, 1), [1, 2]), KanSpec.per_layer((1, 1, 1), [3, 1]),
                 KanSpec.uniform((1, 1), 3), KanSpec.uniform((2, 1), 2)):
        layout = VariableLayout.build(spec, one)
        data = random_dataset(rng, spec, 15)
        out.append((layout, assemble(spec, layout, data).compress()))
    for _, task in small_instances():
        data = generate(task)
        st = build_state(task.kan, task.encoding, data.train, bounds=data.bounds)
        out.append((st.layout(), st.objective().compress()))
    return out


def test_c03_reduction_soundness():
    import itertools
    t0 = time.perf_counter()
    ok, checked = True, 0
    for layout, h in _reduction_instances():
        bits = layout.bit_ids()
        Xh = np.array(list(itertools.product((0, 1), repeat=len(bits))), dtype=np.int8)
        hmin = h.evaluate_many(bits, Xh).min()
        for wf in (15, 20, 25):
            q = reduce(h, wf, first_aux=layout.total_bits, variables=bits)
            order = q.variables()
            if len(order) > 14:
                continue
            checked += 1
            X = np.array(list(itertools.product((0, 1), repeat=len(order))), dtype=np.int8)
            E = q.energies(order, X)
            pos = {v: k for k, v in enumerate(order)}
            for row in X[np.isclose(E, E.min(), rtol=1e-12, atol=1e-12)]:
                ok &= all(row[pos[e.aux]] == row[pos[e.left]] * row[pos[e.right]] for e in q.registry)
            ok &= abs(E.min() - hmin) <= 1e-9 * max(1.0, abs(hmin))
    dt = time.perf_counter() - t0
    report(3, "QUBO argmin consistent and equal to HUBO min", ok and checked >= 20 and dt < 60, dt,
           f"{checked} instance/w pairs")


def test_c04_gradient_fidelity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = 0.0
    specs = list(MATRIX.values()) + [KanSpec.per_layer((2, 2, 1), [[1, 2, 3, 2], [2, 1]])]
    for spec in specs:
        for seed in range(5):
            m = init_model(spec, EncodingSpec(), seed)
            data = random_dataset(rng, spec, 30)
            a, f = gradient(m, data), fd_gradient(m, data, h=1e-5)
            worst = max(worst, np.linalg.norm(a - f) / np.linalg.norm(f))
    dt = time.perf_counter() - t0
    report(4, "analytic gradient == central differences", worst < 1e-5 and dt < 10, dt, f"max rel err {worst:.2e}")


def test_c05_retraining_equivalence():
    t0 = time.perf_counter()
    ok = True
    for name in ("circle", "moons", "reg1", "reg2_sph", "reg3"):
        task = default_task(name, n_train=3000, n_test=10, seed=5)
        data = generate(task)
        A, B = data.train.subset(np.arange(2000)), data.train.subset(np.arange(2000, 3000))
        inc = add_samples(build_state(task.kan, task.encoding, A, bounds=data.bounds), B)
        full = build_state(task.kan, task.encoding, data.train, bounds=data.bounds)
        ok &= state_matches(inc, full)
        base = build_state(task.kan, task.encoding, A, bounds=data.bounds)
        ok &= state_matches(remove_samples(add_samples(base, B), B), base)
    dt = time.perf_counter() - t0
    report(5, "build(A)+add(B) == build(A u B); add/remove identity", ok and dt < 10, dt)


def test_c06_retraining_cost_structure():
    task = default_task("reg3", n_train=100_000, n_test=10, seed=6)
    data = generate(task)
    batch = data.batches(1, 1000)[0]
    t0 = time.perf_counter()
    times = {}
    for n in (10_000, 100_000):
        st = build_state(task.kan, task.encoding, data.train.subset(np.arange(n)), bounds=data.bounds)
        add_samples(st, batch)  # warm caches
        runs = []
        for _ in range(5):
            s = time.perf_counter()
            add_samples(st, batch)
            runs.append(time.perf_counter() - s)
        times[n] = statistics.median(runs)
    ratio = max(times.values()) / min(times.values())
    dt = time.perf_counter() - t0
    report(6, "add_samples cost independent of seen data", ratio < 2.0, dt,
           f"median 10k {times[10_000] * 1e3:.2f}ms vs 100k {times[100_000] * 1e3:.2f}ms (ratio {ratio:.2f})")


@pytest.mark.parametrize("name", ["circle", "moons"])
def test_c07_classification_quality(name):
    t0 = time.perf_counter()
    cfg = HarnessConfig(gd=GdConfig(steps=500), lr_sweep=True, schedule=AnnealSchedule(reads=100, seed=0))
    rep = run_experiment(default_task(name, seed=0), ["sa", "adam", "sgd", "adagrad"], cfg=cfg)
    acc = {r["arm"]: r["metrics"]["accuracy"] for r in rep["arms"]}
    best_gd = max(acc[a] for a in ("adam", "sgd", "adagrad"))
    dt = time.perf_counter() - t0
    report(7, f"{name}: SA accuracy within 0.05 of best GD", acc["sa"] >= best_gd - 0.05 and dt < 120, dt,
           f"sa {acc['sa']:.3f} vs gd {best_gd:.3f}")


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    t0 = time.perf_counter()
    rep = degree_sweep((1, 2), runs=50, seed=0, reads=20, out_dir=out)
    return rep, out, time.perf_counter() - t0


def test_c08_regression_quality(sweep):
    rep, _, dt = sweep
    best = rep["settings"][0]["best"]
    ok = best["mse"] <= 0.01 and best["r2"] >= 0.94 and dt < 300
    report(8, "reg3 (1,2)/1: best of 50 SA runs MSE <= 0.01, R2 >= 0.94", ok, dt,
           f"mse {best['mse']:.4f} r2 {best['r2']:.3f}")


def test_c09_degree_sweep_report(sweep):
    rep, out, dt = sweep
    settings = rep["settings"]
    ok = [s["degrees"] for s in settings] == [[1, 2, 1], [2, 2, 1]]
    ok &= all(len(s["mse"]) == 50 and len(s["r2"]) == 50 for s in settings)
    ok &= (out / "degree_sweep.json").exists() and (out / "degree_sweep.csv").exists()
    d1 = settings[0]["best"]
    ok &= d1["mse"] <= 0.01 and d1["r2"] >= 0.94
    d2 = settings[1]["best"]
    report(9, "degree sweep distributions emitted (50 runs x 2 settings)", ok, dt,
           f"degree-2 best mse {d2['mse']:.4f} r2 {d2['r2']:.3f} (reported only)")


def test_c10_small_instance_optimality():
    t0 = time.perf_counter()
    worst = 100
    for name, task in small_instances():
        q, exact = exact_optimum(task)
        assert q.n_vars <= 20
        hits = sum(
            abs(anneal(q, AnnealSchedule(seed=s)).best_energy - exact.best_energy)
            <= 1e-9 * max(1.0, abs(exact.best_energy))
            for s in range(100)
        )
        worst = min(worst, hits)
    dt = time.perf_counter() - t0
    report(10, "SA finds brute-force optimum on small instances", worst >= 95 and dt < 60, dt,
           f"worst {worst}/100 over {len(small_instances())} instances")
