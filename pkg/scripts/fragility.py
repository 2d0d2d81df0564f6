"""Standard averaging vs median-of-means GD on identical data under one attack.

    python3 scripts/fragility.py configs/mean_shift.toml --out out/fragility
"""

import argparse
import json

from byzgd.harness import compare_baselines, load_config


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()
    config = load_config(args.config)
    standard, robust = compare_baselines(config, args.out)
    for s, b in zip(standard, robust):
        print(json.dumps({"k": s["k"], "q": s["q"], "attack": s["attack"],
                          "standard_final_error": s["final_error_mean"],
                          "byzantine_final_error": b["final_error_mean"]}))


if __name__ == "__main__":
    main()
