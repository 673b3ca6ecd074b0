"""reg3: distribution of test MSE / R2 over repeated annealing runs per first-edge degree."""
import argparse

import numpy as np

from qkan.bench import degree_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bottom-degrees", default="1,2")
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--reads", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/degree_sweep")
    args = ap.parse_args()
    degrees = tuple(int(d) for d in args.bottom_degrees.split(","))
    rep = degree_sweep(degrees, runs=args.runs, seed=args.seed, reads=args.reads, out_dir=args.out)
    for s in rep["settings"]:
        mse = np.asarray(s["mse"])
        print(f"degrees {s['degrees']}: best mse {s['best']['mse']:.4f} r2 {s['best']['r2']:.3f}; "
              f"median mse {np.median(mse):.4f}")


if __name__ == "__main__":
    main()
