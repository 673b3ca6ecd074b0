"""Annealed KAN vs gradient-descent baselines on circle and moons."""
import argparse
import json

from qkan.baseline import GdConfig
from qkan.bench import HarnessConfig, default_task, run_experiment
from qkan.solver import AnnealSchedule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tasks", default="circle,moons")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reads", type=int, default=100)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--out", default="results/classification")
    args = ap.parse_args()
    cfg = HarnessConfig(gd=GdConfig(steps=args.steps), lr_sweep=True, repeats=args.repeats,
                        schedule=AnnealSchedule(reads=args.reads, seed=args.seed))
    summary = {}
    for name in args.tasks.split(","):
        rep = run_experiment(default_task(name, seed=args.seed), ["sa", "adam", "sgd", "adagrad"],
                             out_dir=f"{args.out}/{name}", cfg=cfg)
        summary[name] = {r["arm"]: r.get("metrics", {}).get("accuracy", r.get("error")) for r in rep["arms"]}
        print(name, json.dumps(summary[name]))


if __name__ == "__main__":
    main()
