"""``byzgd`` command line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .aggregation import AggregatorConfig, AllTrimmedError, geometric_median, trim_by_norm
from .diagnostics import compute_constants
from .harness import compare_baselines, load_config, run_experiment
from .problem import ProblemSpec

EXIT_CODES = {"invalid-argument": 2, "io-error": 3, "unsupported-operation": 4}


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, run=replace(config.run, seed=args.seed))
    config = replace(config, sweep={})
    records = run_experiment(config, args.out)
    print(json.dumps(records[0], sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, run=replace(config.run, seed=args.seed))
    for rec in run_experiment(config, args.out):
        print(json.dumps(rec, sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, run=replace(config.run, seed=args.seed))
    standard, robust = compare_baselines(config, args.out)
    print(json.dumps({"standard": standard, "byzantine": robust}, sort_keys=True))
    return 0


def _cmd_median(args) -> int:
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("no points in input")
    points = np.array([[float(c) for c in r] for r in rows])
    if args.tau is not None:
        try:
            points = np.stack(trim_by_norm(points, args.tau))
        except AllTrimmedError as exc:
            print(f"warning: {exc}; using untrimmed points", file=sys.stderr)
    cfg = AggregatorConfig(gamma=args.gamma, max_iterations=args.max_iters, tolerance=args.tol)
    res = geometric_median(points, cfg)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([repr(float(x)) for x in res.point] + [repr(res.certified_ratio)])
    return 0


def _cmd_constants(args) -> int:
    spec = ProblemSpec(d=args.d, L=args.L, M=args.M, sigma1=args.sigma1, alpha1=args.alpha1,
                       sigma2=args.sigma2, alpha2=args.alpha2, r=args.r)
    eta = args.eta if args.eta is not None else args.L / (2 * args.M**2)
    config = SimpleNamespace(N=args.n_total, k=args.k, q=args.q, eta=eta)
    consts = compute_constants(spec, config, args.alpha, args.delta, m_prime=args.m_prime)
    row = consts.as_row()
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if args.header:
        writer.writerow(list(row))
    writer.writerow([_fmt(v) for v in row.values()])
    return 0


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzgd", description="Byzantine-robust gradient descent simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, helptext in (("run", _cmd_run, "single configuration, sweep section ignored"),
                                 ("sweep", _cmd_sweep, "every point of the sweep section"),
                                 ("compare", _cmd_compare, "standard vs Byzantine GD on identical data")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("median", help="approximate geometric median of CSV points")
    p.add_argument("--input", default="-", help="CSV file, one point per row ('-' for stdin)")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--tau", type=float)
    p.set_defaults(func=_cmd_median)

    p = sub.add_parser("constants", help="theory constants as one CSV row")
    p.add_argument("--n-total", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--sigma1", type=float, default=math.sqrt(2.0))
    p.add_argument("--alpha1", type=float, default=math.sqrt(2.0))
    p.add_argument("--sigma2", type=float, default=math.sqrt(8.0))
    p.add_argument("--alpha2", type=float, default=8.0)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--eta", type=float)
    p.add_argument("--m-prime", type=float)
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=_cmd_constants)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, NotImplementedError, OSError) as exc:
        if isinstance(exc, ValueError):
            kind = "invalid-argument"
        elif isinstance(exc, NotImplementedError):
            kind = "unsupported-operation"
        else:
            kind = "io-error"
        message = " ".join(str(exc).split())
        print(f"error: {kind}: {message}", file=sys.stderr)
        return EXIT_CODES[kind]


if __name__ == "__main__":
    sys.exit(main())
