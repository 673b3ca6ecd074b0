"""Iterative protocol: train once, then fold in fresh batches and re-solve, for annealing and GD arms."""
import argparse

from qkan.baseline import GdConfig
from qkan.bench import HarnessConfig, default_task, run_experiment
from qkan.solver import AnnealSchedule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--task", default="reg1")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rounds", type=int, default=4)
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--arms", default="sa,adam")
    ap.add_argument("--out", default="results/retrain")
    args = ap.parse_args()
    cfg = HarnessConfig(gd=GdConfig(steps=500), lr_sweep=True, schedule=AnnealSchedule(seed=args.seed),
                        retrain_rounds=args.rounds, retrain_batch=args.batch)
    rep = run_experiment(default_task(args.task, seed=args.seed), args.arms.split(","),
                         out_dir=args.out, cfg=cfg)
    for r in rep["arms"]:
        if "error" in r:
            print(r["arm"], "error:", r["error"])
            continue
        print(f"{r['arm']}: initial {r['timing']['total']:.3f}s {r['metrics']}")
        for rd in r.get("retrain", []):
            print(f"  round {rd['round']} n={rd['n_train']} {rd['timing']['total']:.3f}s {rd['metrics']}")


if __name__ == "__main__":
    main()
