"""Theory constants and the empirical good-event frequency for one configuration.

    python3 scripts/good_event.py --N 24000 --k 12 --q 4 --d 20 --alpha 0.35
"""

import argparse
import math
from types import SimpleNamespace

import numpy as np

from byzgd.diagnostics import compute_constants, default_theta_grid, estimate_good_event
from byzgd.problem import LinearRegression, random_theta_star


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--N", type=int, default=24000)
    parser.add_argument("--k", type=int, default=12)
    parser.add_argument("--q", type=int, default=4)
    parser.add_argument("--d", type=int, default=20)
    parser.add_argument("--alpha", type=float, default=0.35)
    parser.add_argument("--delta", type=float, help="default: alpha - q/k - 0.01")
    parser.add_argument("--theta-norm", type=float, default=5.0)
    parser.add_argument("--resamples", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    delta = args.delta if args.delta is not None else args.alpha - args.q / args.k - 0.01
    r = args.theta_norm / math.sqrt(args.d)
    model = LinearRegression(args.d, r=r)
    consts = compute_constants(model.spec, SimpleNamespace(N=args.N, k=args.k, q=args.q, eta=0.5),
                               args.alpha, delta)
    for name, value in consts.as_row().items():
        print(f"{name:>22} = {value}")
    theta_star = random_theta_star(args.d, args.theta_norm, args.seed)
    grid = default_theta_grid(theta_star, np.zeros(args.d), r, seed=args.seed)
    est = estimate_good_event(model, theta_star, args.N, args.k, args.q, consts, grid,
                              resamples=args.resamples, seed=args.seed)
    print(f"good-event frequency {est.frequency:.3f} over {args.resamples} resamples "
          f"(threshold {est.threshold:.2f} good batches; lower bound {consts.good_event_prob_lower:.4f})")


if __name__ == "__main__":
    main()
