"""Command-line entry point: ``qkan {train,retrain,eval,bench,inspect}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .baseline import DivergenceError, GdConfig, lr_sweep, train_gd
from .bench import (
    ANNEAL_ARMS,
    GD_ARMS,
    TASKS,
    HarnessConfig,
    MetricError,
    default_task,
    degree_sweep,
    generate,
    metrics,
    run_experiment,
)
from .encoding import EncodingSpec
from .network import DecodedModel, DomainError, KanSpec
from .objective import Dataset, EmptyDatasetError, ObjectiveConfig, objective_template, polynomial_from_moments
from .reduction import DEFAULT_W_FACTOR, qubit_count, reduce
from .session import (
    MAGIC,
    CountUnderflowError,
    Normalizer,
    OutOfRangeError,
    SchemaMismatchError,
    StateError,
    add_samples,
    build_state,
    load_state,
    remove_samples,
    retrain,
    save_state,
)
from .solver import AnnealSchedule, SolverError, TooManyVariablesError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


_DATA_ERRORS = (DataError, EmptyDatasetError, SchemaMismatchError, OutOfRangeError, CountUnderflowError,
                StateError, MetricError, DomainError, OSError, json.JSONDecodeError)
_SOLVER_ERRORS = (TooManyVariablesError, SolverError, DivergenceError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- parsing helpers -------------------------------------------------------------

def parse_shape(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad --shape {text!r}; expected e.g. 2,1") from None
    return widths


def parse_degrees(text: str, widths: tuple[int, ...]) -> KanSpec:
    """``"2"`` (all edges), ``"2/1"`` (per layer) or ``"1,2/1"`` (per edge within a layer)."""
    try:
        layers = []
        for part in str(text).split("/"):
            vals = [int(x) for x in part.split(",")]
            layers.append(vals[0] if len(vals) == 1 else vals)
    except ValueError:
        raise UsageError(f"bad --degrees {text!r}") from None
    if len(layers) == 1 and not isinstance(layers[0], list):
        return KanSpec.uniform(widths, layers[0])
    if len(layers) != len(widths) - 1:
        raise UsageError(f"--degrees lists {len(layers)} layers but --shape has {len(widths) - 1}")
    return KanSpec.per_layer(widths, layers)


def parse_bounds(text: str) -> Normalizer:
    try:
        lo, hi = text.split(":")
        low = tuple(float(x) for x in lo.split(","))
        high = tuple(float(x) for x in hi.split(","))
    except ValueError:
        raise UsageError(f"bad --bounds {text!r}; expected lo1,lo2:hi1,hi2") from None
    if len(low) != len(high) or any(h < l for l, h in zip(low, high)):
        raise UsageError("--bounds needs matching lengths with low <= high")
    return Normalizer(low, high)


def read_csv(path, kind: str = "train") -> Dataset:
    """Dataset CSV: header ``x1,...,xd,y``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    head = [h.strip() for h in rows[0]]
    d = len(head) - 1
    if d < 1 or head != [f"x{i + 1}" for i in range(d)] + ["y"]:
        raise DataError(f"{path}: header must be x1,...,xd,y (got {','.join(head)})")
    try:
        arr = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, d + 1)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values")
    return Dataset(arr[:, :d], arr[:, d], kind)


def write_csv(ds: Dataset, path) -> None:
    d = ds.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(d)] + ["y"])
        for x, y in zip(ds.inputs, ds.targets[:, 0]):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def _infer_kind(targets: np.ndarray) -> str:
    return "classification" if np.all(np.isin(targets, (0.0, 1.0))) else "regression"


# -- argument groups ---------------------------------------------------------------

def _add_network(p):
    g = p.add_argument_group("network")
    g.add_argument("--shape", help="layer widths, e.g. 2,1")
    g.add_argument("--degrees", help="'2', per layer '2/1', or per edge '1,2/1'")
    g.add_argument("--enc-low", type=int, help="lowest radix-2 exponent")
    g.add_argument("--enc-high", type=int, help="highest radix-2 exponent")
    g.add_argument("--unsigned", action="store_true", default=None, help="drop the negative bit set")
    g.add_argument("--lambda", dest="lambda_val", type=float, default=1.0, help="validation weight")


def _add_anneal(p, seed_required=False):
    g = p.add_argument_group("annealing")
    g.add_argument("--solver", choices=("sa", "exact"), default="sa")
    g.add_argument("--reads", type=int, default=100)
    g.add_argument("--sweeps", type=int, default=1000)
    if seed_required:
        g.add_argument("--seed", type=int, required=True, help="mandatory in bench mode")
    else:
        g.add_argument("--seed", type=int, default=0)
    g.add_argument("--beta-start", type=float)
    g.add_argument("--beta-end", type=float)
    g.add_argument("--w-factor", type=float, default=DEFAULT_W_FACTOR, help="penalty weight / max |coefficient|")
    g.add_argument("--no-polish", action="store_true", default=False,
                   help="skip per-read descent on the unreduced objective")


def _add_gd(p, with_optimizer=True):
    g = p.add_argument_group("gradient descent")
    if with_optimizer:
        g.add_argument("--optimizer", choices=GD_ARMS, help="train with this optimizer instead of annealing")
    g.add_argument("--lr", type=float, default=0.01)
    g.add_argument("--steps", type=int, default=500)
    g.add_argument("--lr-sweep", action="store_true", default=False)


def _add_task_data(p):
    g = p.add_argument_group("data")
    g.add_argument("--task", choices=TASKS, help="generate a bench task instead of reading CSV")
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-val", type=int)
    g.add_argument("--n-test", type=int)
    g.add_argument("--noise", type=float)


def build_parser() -> _Parser:
    ap = _Parser(prog="qkan", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    subs = {}

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="JSON file with flag defaults")
    _add_task_data(p)
    p.add_argument("--data", help="training CSV (x1,...,xd,y)")
    p.add_argument("--val-data", help="validation CSV")
    p.add_argument("--test-data", help="test CSV for reported metrics")
    p.add_argument("--val-frac", type=float, default=0.0, help="hold out this fraction of --data")
    p.add_argument("--bounds", help="fixed input box 'lo1,lo2:hi1,hi2' (default: min/max of the data)")
    _add_network(p)
    _add_anneal(p)
    _add_gd(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--save-state", help="also write the objective state here")
    p.add_argument("--save-qubo", help="write the reduced QUBO (COO text + JSON sidecar)")
    p.set_defaults(func=cmd_train)
    subs["train"] = p

    p = sub.add_parser("retrain", help="fold CSV batches into a saved state and re-solve")
    p.add_argument("--config")
    p.add_argument("--state", required=True)
    p.add_argument("--add", action="append", default=None, help="CSV batch to add (repeatable)")
    p.add_argument("--remove", action="append", default=None, help="CSV batch to remove (repeatable)")
    p.add_argument("--add-val", action="append", default=None, help="validation CSV batch to add")
    p.add_argument("--test-data")
    _add_anneal(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--save-state", help="write the updated state here")
    p.set_defaults(func=cmd_retrain)
    subs["retrain"] = p

    p = sub.add_parser("eval", help="score a model on a CSV")
    p.add_argument("--config")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=("classification", "regression"))
    p.set_defaults(func=cmd_eval)
    subs["eval"] = p

    p = sub.add_parser("inspect", help="summarize a model JSON or state file")
    p.add_argument("path")
    p.add_argument("--w-factor", type=float, default=DEFAULT_W_FACTOR)
    p.set_defaults(func=cmd_inspect, config=None)
    subs["inspect"] = p

    bp = sub.add_parser("bench", help="benchmark harness")
    bsub = bp.add_subparsers(dest="bench_command", parser_class=_Parser)
    bsub.required = True

    p = bsub.add_parser("run", help="compare training arms on one task")
    p.add_argument("--config")
    _add_task_data(p)
    p.add_argument("--arms", default="sa,adam", help=f"comma list from {ANNEAL_ARMS + GD_ARMS}")
    _add_network(p)
    _add_anneal(p, seed_required=True)
    _add_gd(p, with_optimizer=False)
    p.add_argument("--repeats", type=int, default=1, help="timing repetitions (median reported)")
    p.add_argument("--retrain-rounds", type=int, default=0)
    p.add_argument("--retrain-batch", type=int, default=1000)
    p.add_argument("--parallel-arms", action="store_true", default=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_run)
    subs["bench run"] = p

    p = bsub.add_parser("sweep", help="repeated seeded annealing on reg3 per bottom-edge degree")
    p.add_argument("--config")
    p.add_argument("--bottom-degrees", default="1,2")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--reads", type=int, default=20)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--w-factor", type=float, default=DEFAULT_W_FACTOR)
    p.add_argument("--no-polish", action="store_true", default=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_sweep)
    subs["bench sweep"] = p

    p = bsub.add_parser("generate", help="write a task's splits (and retrain batches) as CSV")
    p.add_argument("--config")
    _add_task_data(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--retrain-rounds", type=int, default=0)
    p.add_argument("--retrain-batch", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_generate)
    subs["bench generate"] = p

    ap._subs = subs
    return ap


def _config_path(argv) -> str | None:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _apply_config(ap: _Parser, argv) -> None:
    """Install config-file values as parser defaults so explicit flags still win."""
    path = _config_path(argv)
    if path is None or not argv:
        return
    key = argv[0] if argv[0] != "bench" else " ".join(argv[:2])
    p = ap._subs.get(key)
    if p is None:
        return
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    known = {a.dest for a in p._actions}
    cfg = {k: v for k, v in cfg.items() if k not in ("command", "bench_command", "config")}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    p.set_defaults(**cfg)
    for a in p._actions:
        if a.dest in cfg:
            a.required = False


# -- resolution ----------------------------------------------------------------------

def _resolve_network(args, fallback: KanSpec | None, fallback_enc: EncodingSpec | None):
    if args.shape:
        widths = parse_shape(args.shape)
        spec = parse_degrees(args.degrees or "1", widths)
    elif args.degrees and fallback is not None:
        spec = parse_degrees(args.degrees, fallback.widths)
    elif fallback is not None:
        spec = fallback
    else:
        raise UsageError("--shape is required when training from CSV")
    enc0 = fallback_enc or EncodingSpec()
    enc = EncodingSpec(
        enc0.low_exp if args.enc_low is None else args.enc_low,
        enc0.high_exp if args.enc_high is None else args.enc_high,
        enc0.signed if args.unsigned is None else not args.unsigned,
    )
    return spec, enc


def _schedule(args) -> AnnealSchedule:
    return AnnealSchedule(args.beta_start, args.beta_end, args.sweeps, args.reads, args.seed)


def _task_overrides(args) -> dict:
    o = {}
    for k in ("n_train", "n_val", "n_test", "noise"):
        v = getattr(args, k, None)
        if v is not None:
            o[k] = v
    if getattr(args, "seed", None) is not None:
        o["seed"] = args.seed
    return o


def _load_training_data(args):
    """Returns (train, val, test, bounds, default spec, default encoding)."""
    if args.task:
        task = default_task(args.task, **_task_overrides(args))
        data = generate(task)
        return data.train, data.val, data.test, data.bounds, task.kan, task.encoding
    if not args.data:
        raise UsageError("give --task or --data")
    train = read_csv(args.data)
    val = read_csv(args.val_data, "validation") if args.val_data else None
    if args.val_frac:
        if val is not None:
            raise UsageError("--val-frac and --val-data are exclusive")
        if not 0 < args.val_frac < 1:
            raise UsageError("--val-frac must lie in (0, 1)")
        perm = np.random.default_rng(args.seed).permutation(train.n)
        k = int(round(args.val_frac * train.n))
        v = train.subset(perm[:k])
        val = Dataset(v.inputs, v.targets, "validation")
        train = train.subset(perm[k:])
    test = read_csv(args.test_data, "test") if args.test_data else None
    if args.bounds:
        bounds = parse_bounds(args.bounds)
    else:
        bounds = Normalizer.fit(train.inputs, *([val.inputs] if val is not None else []))
    return train, val, test, bounds, None, None


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config") and not k.startswith("_")}


def _mkparent(path) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=float))


def _score(model: DecodedModel, ds: Dataset | None, kind: str | None = None):
    if ds is None or ds.n == 0:
        return None
    kind = kind or _infer_kind(ds.targets)
    return {"kind": kind, "n": ds.n, **metrics(model.predict(ds.inputs)[:, 0], ds.targets[:, 0], kind)}


def _anneal_summary(rep) -> dict:
    return {"energy": rep.result.best_energy, "qubits": rep.qubits, "aux": len(rep.qubo.registry),
            "aux_violations": rep.result.aux_violations, "hubo_terms": rep.hubo_terms,
            "timings": rep.timings}


# -- commands --------------------------------------------------------------------------

def cmd_train(args) -> int:
    train, val, test, bounds, dspec, denc = _load_training_data(args)
    spec, enc = _resolve_network(args, dspec, denc)
    if spec.n_inputs != train.inputs.shape[1]:
        raise DataError(f"network expects {spec.n_inputs} inputs, data has {train.inputs.shape[1]}")
    out = Path(args.out)
    summary = {}
    if args.optimizer:
        if args.save_state or args.save_qubo:
            raise UsageError("--save-state/--save-qubo apply to annealing only")
        norm = lambda d: None if d is None else Dataset(bounds.transform(d.inputs, strict=False), d.targets, d.kind)
        cfg = GdConfig(args.optimizer, args.lr, args.steps, seed=args.seed)
        lo, hi = np.asarray(bounds.low), np.asarray(bounds.high)
        if args.lr_sweep:
            res = lr_sweep(spec, enc, norm(train), norm(val), cfg, bounds_low=lo, bounds_high=hi)
        else:
            res = train_gd(spec, enc, norm(train), norm(val), cfg, bounds_low=lo, bounds_high=hi)
        model = res.model
        summary["learning_rate"] = res.learning_rate
        trace = out.with_suffix(".trace.csv")
        trace.parent.mkdir(parents=True, exist_ok=True)
        with open(trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "train_mse", "val_mse"])
            w.writerows(res.trace_rows())
    else:
        state = build_state(spec, enc, train, val, ObjectiveConfig(args.lambda_val), bounds)
        model, rep = retrain(state, args.solver, _schedule(args), args.w_factor, not args.no_polish)
        summary.update(_anneal_summary(rep))
        if args.save_state:
            save_state(state, _mkparent(args.save_state))
        if args.save_qubo:
            rep.qubo.save(_mkparent(args.save_qubo))
    _write_json(out, model.to_dict())
    summary["train"] = _score(model, train)
    summary["test"] = _score(model, test)
    _write_json(out.with_suffix(".metrics.json"), summary)
    _write_json(out.parent / "config.resolved.json", _resolved(args))
    print(json.dumps({k: summary[k] for k in ("train", "test") if summary[k]}, default=float))
    return EXIT_OK


def cmd_retrain(args) -> int:
    state = load_state(args.state)
    n0 = state.n_train
    for p in args.add or []:
        state = add_samples(state, read_csv(p))
    for p in args.add_val or []:
        state = add_samples(state, read_csv(p, "validation"))
    for p in args.remove or []:
        state = remove_samples(state, read_csv(p))
    model, rep = retrain(state, args.solver, _schedule(args), args.w_factor, not args.no_polish)
    out = Path(args.out)
    _write_json(out, model.to_dict())
    summary = {"n_train_before": n0, "n_train": state.n_train, "n_val": state.n_val, **_anneal_summary(rep)}
    if args.test_data:
        summary["test"] = _score(model, read_csv(args.test_data, "test"))
    _write_json(out.with_suffix(".metrics.json"), summary)
    _write_json(out.parent / "config.resolved.json", _resolved(args))
    if args.save_state:
        save_state(state, _mkparent(args.save_state))
    print(json.dumps({"n_train": state.n_train, "energy": rep.result.best_energy,
                      "test": summary.get("test")}, default=float))
    return EXIT_OK


def _load_model(path) -> DecodedModel:
    try:
        return DecodedModel.from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path} is not a model file: {exc}") from exc


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    ds = read_csv(args.data, "test")
    if ds.inputs.shape[1] != model.spec.n_inputs:
        raise DataError(f"model expects {model.spec.n_inputs} inputs, data has {ds.inputs.shape[1]}")
    print(json.dumps(_score(model, ds, args.kind), default=float))
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = Path(args.path)
    raw = path.read_bytes()
    if raw.startswith(MAGIC):
        state = load_state(path)
        layout = state.layout()
        q = reduce(state.objective().compress(), args.w_factor, first_aux=layout.total_bits,
                   variables=layout.bit_ids())
        lines = [
            f"objective state v{state.version}  digest {state.digest}",
            f"shape {list(state.spec.widths)}  edges {len(state.spec.edges())}",
            f"encoding exponents {state.encoding.low_exp}..{state.encoding.high_exp} "
            f"{'signed' if state.encoding.signed else 'unsigned'}",
            f"samples: train {state.n_train}  validation {state.n_val}",
            f"moments: {state.n_moments}",
            f"control bits {layout.total_bits} + aux {len(q.registry)} = qubits {qubit_count(layout, q.registry)}",
            f"bounds low {list(state.bounds.low)} high {list(state.bounds.high)}",
        ]
    else:
        try:
            model = DecodedModel.from_dict(json.loads(raw))
        except (KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
            raise DataError(f"{path} is neither a model nor a state file: {exc}") from exc
        from .network import VariableLayout
        layout = VariableLayout.build(model.spec, model.encoding)
        # aux count from the data-independent monomial structure (unit moments)
        tpl = objective_template(model.spec, model.encoding)
        h = polynomial_from_moments(tpl, np.ones(len(tpl.keys))).compress()
        q = reduce(h, args.w_factor, first_aux=layout.total_bits, variables=layout.bit_ids())
        lines = [f"model shape {list(model.spec.widths)}",
                 f"encoding exponents {model.encoding.low_exp}..{model.encoding.high_exp} "
                 f"{'signed' if model.encoding.signed else 'unsigned'}"]
        for e in model.spec.edges():
            cps = ", ".join(f"{v:g}" for v in model.control_points[e])
            lines.append(f"  edge {e}: degree {model.spec.degrees[e]}  P = [{cps}]")
        lines.append(f"control bits {layout.total_bits} + aux {len(q.registry)} = qubits "
                     f"{qubit_count(layout, q.registry)} (structural)")
        if model.bounds_low is not None:
            lines.append(f"bounds low {model.bounds_low.tolist()} high {model.bounds_high.tolist()}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_bench_run(args) -> int:
    arms = [a.strip() for a in args.arms.split(",") if a.strip()]
    bad = [a for a in arms if a not in ANNEAL_ARMS + GD_ARMS]
    if bad:
        raise UsageError(f"unknown arms: {', '.join(bad)}")
    if not args.task:
        raise UsageError("bench run needs --task")
    base = default_task(args.task, **_task_overrides(args))
    spec, enc = _resolve_network(args, base.kan, base.encoding)
    from dataclasses import replace
    task = replace(base, kan=spec, encoding=enc)
    cfg = HarnessConfig(
        gd=GdConfig("adam", args.lr, args.steps, seed=args.seed), lr_sweep=args.lr_sweep,
        schedule=_schedule(args), w_factor=args.w_factor, objective=ObjectiveConfig(args.lambda_val),
        polish=not args.no_polish, repeats=args.repeats,
        retrain_rounds=args.retrain_rounds, retrain_batch=args.retrain_batch,
    )
    report = run_experiment(task, arms, args.out, cfg, parallel=args.parallel_arms)
    _write_json(Path(args.out) / "config.resolved.json", _resolved(args))
    for r in report["arms"]:
        if "error" in r:
            print(f"{r['arm']:8s} ERROR {r['error']}", file=sys.stderr)
        else:
            m = ", ".join(f"{k}={v:.4g}" for k, v in r["metrics"].items() if isinstance(v, float))
            print(f"{r['arm']:8s} {m}  total={r['timing']['total']:.3f}s")
    return EXIT_OK if all("error" not in r for r in report["arms"]) else EXIT_SOLVER


def cmd_bench_sweep(args) -> int:
    try:
        degrees = tuple(int(x) for x in args.bottom_degrees.split(","))
    except ValueError:
        raise UsageError(f"bad --bottom-degrees {args.bottom_degrees!r}") from None
    task = default_task("reg3", **_task_overrides(args))
    rep = degree_sweep(degrees, args.runs, args.seed, args.reads, args.sweeps, args.w_factor,
                       not args.no_polish, args.out, task)
    _write_json(Path(args.out) / "config.resolved.json", _resolved(args))
    for s in rep["settings"]:
        print(f"degrees {s['degrees']}: best mse={s['best']['mse']:.5f} r2={s['best']['r2']:.4f} "
              f"median mse={float(np.median(s['mse'])):.5f} ({s['seconds']:.1f}s)")
    return EXIT_OK


def cmd_bench_generate(args) -> int:
    if not args.task:
        raise UsageError("bench generate needs --task")
    data = generate(default_task(args.task, **_task_overrides(args)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(data.train, out / "train.csv")
    if data.val is not None:
        write_csv(data.val, out / "val.csv")
    write_csv(data.test, out / "test.csv")
    for i, b in enumerate(data.batches(args.retrain_rounds, args.retrain_batch) if args.retrain_rounds else []):
        write_csv(b, out / f"batch_{i + 1}.csv")
    _write_json(out / "config.resolved.json", _resolved(args))
    print(f"wrote {data.train.n} train / {data.test.n} test samples to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"qkan: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _SOLVER_ERRORS as exc:
        print(f"qkan: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except _DATA_ERRORS as exc:
        print(f"qkan: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:  # invalid configuration values
        print(f"qkan: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
