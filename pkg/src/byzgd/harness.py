"""Experiment runner: TOML configs, seed derivation, sweeps, CSV/JSON output.

Config layout (field names are the contract)::

    [run]        N, m, k, q, eta, rounds, seed, theta0, algorithm
    [aggregator] gamma, tau, max_iterations, tolerance
    [attack]     strategy, policy ("resample" | "fixed"), ids, scale, vector, target, magnitude
    [problem]    model, d, r, theta_star | theta_star_norm
    [experiment] repetitions, output_dir, record_wall_time, alpha, delta, good_event_resamples
    [sweep]      k, q, attack   (lists)
"""

from __future__ import annotations

import itertools
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .adversary import STRATEGIES, AttackSpec, FixedFaultSet, ResampledFaultSet
from .aggregation import AggregatorConfig
from .diagnostics import compute_constants, default_theta_grid, estimate_good_event
from .engine import RoundTrace, RunConfig, run_byzantine_gd, run_standard_bgd, write_trace_csv
from .problem import (LinearRegression, derive_rng, generate_linear_regression,
                      random_theta_star, shard_dataset)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = {
    "run": {"N", "m", "k", "q", "eta", "rounds", "seed", "theta0", "algorithm"},
    "aggregator": {"gamma", "tau", "max_iterations", "tolerance"},
    "attack": {"strategy", "policy", "ids", "scale", "vector", "target", "magnitude"},
    "problem": {"model", "d", "r", "theta_star", "theta_star_norm"},
    "experiment": {"repetitions", "output_dir", "record_wall_time", "alpha", "delta",
                   "good_event_resamples"},
    "sweep": {"k", "q", "attack"},
}
ALGORITHMS = ("byzantine", "standard")


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunConfig
    d: int
    theta_star: tuple[float, ...] | None = None
    theta_star_norm: float = 1.0
    r: float = 1.0
    algorithm: str = "byzantine"
    attack_params: dict = field(default_factory=dict)
    repetitions: int = 1
    sweep: dict = field(default_factory=dict)
    output_dir: str = "out"
    record_wall_time: bool = False
    alpha: float | None = None
    delta: float | None = None
    good_event_resamples: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"run.algorithm must be one of {ALGORITHMS}")
        if self.theta_star is not None and len(self.theta_star) != self.d:
            raise ValueError(f"problem.theta_star has length {len(self.theta_star)}, expected d={self.d}")
        unknown = set(self.sweep) - SECTIONS["sweep"]
        if unknown:
            raise ValueError(f"unknown sweep keys {sorted(unknown)}")
        for _, k, q, strategy in self.points():
            _point_run(self, k, q, strategy, seed=0)

    def points(self) -> list[tuple[int, int, int, str]]:
        """Sweep points ``(index, k, q, strategy)`` in sweep order."""
        ks = self.sweep.get("k", [self.run.k])
        qs = self.sweep.get("q", [self.run.q])
        attacks = self.sweep.get("attack", [self.run.attack.strategy])
        return [(i, int(k), int(q), str(a)) for i, (k, q, a) in enumerate(itertools.product(ks, qs, attacks))]

    def to_dict(self) -> dict:
        run = self.run
        agg = run.aggregator
        attack = dict(self.attack_params)
        attack["strategy"] = run.attack.strategy
        return {
            "run": {"N": run.N, "m": run.m, "k": run.k, "q": run.q, "eta": run.eta,
                    "rounds": run.rounds, "seed": run.seed, "algorithm": self.algorithm,
                    "theta0": list(run.theta0) if run.theta0 is not None else None},
            "aggregator": {"gamma": agg.gamma, "tau": agg.tau, "max_iterations": agg.max_iterations,
                           "tolerance": agg.tolerance},
            "attack": attack,
            "problem": {"model": "linear_regression", "d": self.d, "r": self.r,
                        "theta_star": list(self.theta_star) if self.theta_star is not None else None,
                        "theta_star_norm": self.theta_star_norm},
            "experiment": {"repetitions": self.repetitions, "output_dir": str(self.output_dir),
                           "record_wall_time": self.record_wall_time, "alpha": self.alpha,
                           "delta": self.delta, "good_event_resamples": self.good_event_resamples},
            "sweep": {k: list(v) for k, v in self.sweep.items()},
        }


def _build_attack(params: dict, strategy: str, q: int, seed: int) -> AttackSpec:
    if strategy not in STRATEGIES:
        raise ValueError(f"attack.strategy {strategy!r} not in {STRATEGIES}")
    policy_name = params.get("policy", "resample")
    if policy_name == "fixed":
        ids = params.get("ids")
        policy = FixedFaultSet(tuple(ids) if ids is not None and len(ids) == q else tuple(range(q)))
    elif policy_name == "resample":
        policy = ResampledFaultSet(q, int(derive_rng(seed, "attack").integers(2**63)))
    else:
        raise ValueError(f"attack.policy must be 'fixed' or 'resample', got {policy_name!r}")
    kwargs = {key: params[key] for key in ("scale", "vector", "target", "magnitude") if key in params}
    if strategy == "omniscient_mean_shift" and "target" not in kwargs:
        kwargs["target"] = (0.0,)
    return AttackSpec(strategy, policy if strategy != "none" else FixedFaultSet(()), **kwargs)


def _point_run(config: ExperimentConfig, k: int, q: int, strategy: str, seed: int) -> RunConfig:
    base = config.run
    agg = replace(base.aggregator, k=k, gamma=base.aggregator.gamma)
    attack = _build_attack(config.attack_params, strategy, q, seed)
    return replace(base, k=k, q=q, aggregator=agg, attack=attack, seed=seed)


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an ``ExperimentConfig`` from nested dicts (a parsed TOML document)."""
    for section, body in raw.items():
        if section not in SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        unknown = set(body) - SECTIONS[section]
        if unknown:
            raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
    run = dict(raw.get("run", {}))
    agg = dict(raw.get("aggregator", {}))
    attack = dict(raw.get("attack", {}))
    problem = dict(raw.get("problem", {}))
    exp = dict(raw.get("experiment", {}))
    if problem.get("model", "linear_regression") != "linear_regression":
        raise ValueError("problem.model: only 'linear_regression' is available")
    for key in ("N", "m", "d"):
        section = run if key != "d" else problem
        if key not in section:
            raise ValueError(f"missing required key {'problem' if key == 'd' else 'run'}.{key}")

    k = int(run.get("k", 1))
    q = int(run.get("q", 0))
    seed = int(run.get("seed", 0))
    aggregator = AggregatorConfig(
        k=k,
        gamma=agg.get("gamma"),
        tau=agg.get("tau"),
        max_iterations=int(agg.get("max_iterations", 200)),
        tolerance=float(agg.get("tolerance", 1e-10)),
    )
    strategy = attack.pop("strategy", "none")
    attack_spec = _build_attack(attack, strategy, q, seed)
    run_cfg = RunConfig(
        N=int(run["N"]), m=int(run["m"]), k=k, q=q,
        eta=float(run.get("eta", 0.5)),
        rounds=run.get("rounds"),
        theta0=run.get("theta0"),
        aggregator=aggregator,
        attack=attack_spec,
        seed=seed,
    )
    ts = problem.get("theta_star")
    return ExperimentConfig(
        run=run_cfg,
        d=int(problem["d"]),
        theta_star=tuple(float(x) for x in ts) if ts is not None else None,
        theta_star_norm=float(problem.get("theta_star_norm", 1.0)),
        r=float(problem.get("r", 1.0)),
        algorithm=run.get("algorithm", "byzantine"),
        attack_params=attack,
        repetitions=int(exp.get("repetitions", 1)),
        sweep=dict(raw.get("sweep", {})),
        output_dir=str(exp.get("output_dir", "out")),
        record_wall_time=bool(exp.get("record_wall_time", False)),
        alpha=exp.get("alpha"),
        delta=exp.get("delta"),
        good_event_resamples=int(exp.get("good_event_resamples", 0)),
    )


def load_config(path) -> ExperimentConfig:
    with open(Path(path), "rb") as fh:
        return parse_config(tomllib.load(fh))


def rounds_to_floor(traces: list[RoundTrace], rel: float = 0.1) -> int:
    """First round whose error is within ``rel`` of the run's final error."""
    final = traces[-1].error
    for tr in traces:
        if tr.error <= (1.0 + rel) * final:
            return tr.t
    return traces[-1].t


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


@dataclass
class PointResult:
    record: dict
    traces: list[list[RoundTrace]]


def _run_point(config: ExperimentConfig, index: int, k: int, q: int, strategy: str,
               algorithm: str, trace_dir: Path | None) -> PointResult:
    model = LinearRegression(config.d, r=config.r)
    finals, to_floor, all_traces = [], [], []
    run_cfg = None
    for rep in range(config.repetitions):
        rep_seed = int(derive_rng(config.run.seed, "repetition", index, rep).integers(2**63))
        if config.theta_star is not None:
            theta_star = np.array(config.theta_star)
        else:
            theta_star = random_theta_star(config.d, config.theta_star_norm, rep_seed)
        data = generate_linear_regression(theta_star, config.run.N, rep_seed)
        shards = shard_dataset(data, config.run.m)
        run_cfg = _point_run(config, k, q, strategy, rep_seed)
        runner = run_byzantine_gd if algorithm == "byzantine" else run_standard_bgd
        traces = runner(run_cfg, model, shards, theta_star)
        if trace_dir is not None:
            name = f"p{index:03d}_k{k}_q{q}_{strategy}_rep{rep:03d}.csv"
            write_trace_csv(traces, trace_dir / name, record_wall_time=config.record_wall_time)
        finals.append(traces[-1].error)
        to_floor.append(rounds_to_floor(traces))
        all_traces.append(traces)

    record: dict[str, Any] = {
        "index": index, "k": k, "q": q, "attack": strategy, "algorithm": algorithm,
        "repetitions": config.repetitions,
        "final_error_mean": float(np.mean(finals)),
        "final_error_min": float(np.min(finals)),
        "final_error_max": float(np.max(finals)),
        "rounds_to_floor": float(np.mean(to_floor)),
        "theory_floor": None,
        "good_event_frequency": None,
    }
    if config.alpha is not None and config.delta is not None:
        try:
            consts = compute_constants(model.spec, run_cfg, config.alpha, config.delta)
        except ValueError:
            consts = None
        if consts is not None:
            record["theory_floor"] = _clean(consts.floor)
            if config.good_event_resamples > 0:
                theta_star = (np.array(config.theta_star) if config.theta_star is not None
                              else random_theta_star(config.d, config.theta_star_norm, config.run.seed))
                grid = default_theta_grid(theta_star, run_cfg.initial_theta(config.d), config.r,
                                          seed=config.run.seed)
                est = estimate_good_event(model, theta_star, config.run.N, k, q, consts, grid,
                                          config.good_event_resamples, seed=config.run.seed)
                record["good_event_frequency"] = est.frequency
    return PointResult(record, all_traces)


def _prepare_output(config: ExperimentConfig, out: Path | None) -> Path | None:
    if out is None:
        return None
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    _dump_json(config.to_dict(), out / "config.json")
    return out


def run_experiment(config: ExperimentConfig, output_dir=None, algorithm: str | None = None,
                   write: bool = True) -> list[dict]:
    """Run every sweep point and repetition; returns the summary records.

    Writes ``config.json``, ``traces/*.csv`` and ``summary.json`` under the
    output directory unless ``write`` is false.
    """
    algorithm = algorithm or config.algorithm
    out = _prepare_output(config, Path(output_dir or config.output_dir)) if write else None
    records = []
    for index, k, q, strategy in config.points():
        result = _run_point(config, index, k, q, strategy, algorithm, out / "traces" if out else None)
        records.append(result.record)
    if out is not None:
        _dump_json({"points": records}, out / "summary.json")
    return records


def compare_baselines(config: ExperimentConfig, output_dir=None, write: bool = True) -> tuple[list[dict], list[dict]]:
    """Standard averaging and Byzantine GD on identical data, seeds and attacks."""
    out = Path(output_dir or config.output_dir)
    if write:
        _prepare_output(config, out)
    standard = run_experiment(config, out / "standard", "standard", write)
    robust = run_experiment(config, out / "byzantine", "byzantine", write)
    if write:
        _dump_json({"standard": standard, "byzantine": robust}, out / "comparison.json")
    return standard, robust
