"""Failure-free final error as a function of the number of batches k.

Prints the mean final error per k and the least-squares slope of
log(error) against log(k); the worst-case rate sqrt(dk/N) has slope 1/2.

    python3 scripts/sweep_k.py configs/sweep_k.toml
"""

import argparse

import numpy as np

from byzgd.harness import load_config, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--out", default=None, help="write traces and summary here")
    args = parser.parse_args()
    config = load_config(args.config)
    records = run_experiment(config, args.out, write=args.out is not None)
    ks = np.array([r["k"] for r in records], dtype=float)
    means = np.array([r["final_error_mean"] for r in records])
    for k, e, rec in zip(ks, means, records):
        print(f"k={int(k):4d}  mean={e:.6f}  min={rec['final_error_min']:.6f}  max={rec['final_error_max']:.6f}")
    if len(ks) > 1:
        slope = np.polyfit(np.log(ks), np.log(means), 1)[0]
        print(f"slope of log(mean error) vs log(k): {slope:.3f}")


if __name__ == "__main__":
    main()
