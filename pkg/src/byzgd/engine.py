"""Synchronous parameter-server round loop.

``run_standard_bgd`` averages the worker reports; ``run_byzantine_gd`` takes
the geometric median of batch means. Both share the same loop, so a
Byzantine run with ``k = 1`` reproduces the standard run bit for bit.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .adversary import AttackSpec, apply_attack, select_fault_set
from .aggregation import AggregatorConfig, median_of_means
from .problem import DataShard, LossModel, as_model_vector, stack_shards

TRACE_COLUMNS = ("round", "error", "agg_deviation", "n_byzantine", "wall_ms")


def default_rounds(N: int) -> int:
    return 4 * math.ceil(math.log2(N))


@dataclass(frozen=True)
class RunConfig:
    N: int
    m: int
    k: int = 1
    q: int = 0
    eta: float = 0.5
    rounds: int | None = None
    theta0: tuple[float, ...] | None = None  # None -> zero vector
    aggregator: AggregatorConfig | None = None
    attack: AttackSpec = field(default_factory=AttackSpec)
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.N < 1:
            raise ValueError("N and m must be positive")
        if self.N % self.m:
            raise ValueError(f"m={self.m} must divide N={self.N}")
        if not 1 <= self.k <= self.m or self.m % self.k:
            raise ValueError(f"k={self.k} must divide m={self.m}")
        if not 0 <= self.q <= self.m:
            raise ValueError(f"q={self.q} must lie in [0, m]")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.rounds is not None and self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.attack.strategy != "none" and self.attack.q > self.q:
            raise ValueError(f"attack controls {self.attack.q} workers but q={self.q}")
        agg = self.aggregator or AggregatorConfig(k=self.k)
        if agg.k != self.k:
            raise ValueError(f"aggregator.k={agg.k} disagrees with k={self.k}")
        if agg.gamma is None:
            agg = agg.with_gamma(1.0 / self.N)
        object.__setattr__(self, "aggregator", agg)
        if self.rounds is None:
            object.__setattr__(self, "rounds", default_rounds(self.N))
        if self.theta0 is not None:
            object.__setattr__(self, "theta0", tuple(float(x) for x in self.theta0))

    def initial_theta(self, d: int) -> np.ndarray:
        if self.theta0 is None:
            return np.zeros(d)
        return as_model_vector(self.theta0, d)


@dataclass(frozen=True)
class RoundTrace:
    t: int
    theta: np.ndarray
    error: float
    agg_deviation: float | None
    fault_set: frozenset[int]
    wall_ms: float
    aggregate: np.ndarray = field(repr=False, default=None)

    def same_run(self, other: "RoundTrace") -> bool:
        """Equality of everything except wall-clock time."""
        return (self.t == other.t
                and np.array_equal(self.theta, other.theta)
                and self.error == other.error
                and self.agg_deviation == other.agg_deviation
                and self.fault_set == other.fault_set
                and np.array_equal(self.aggregate, other.aggregate))


def gd_step(theta, gradient, eta: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    if theta.shape != gradient.shape:
        raise ValueError(f"theta {theta.shape} and gradient {gradient.shape} disagree")
    return theta - eta * gradient


def _run(config: RunConfig, model: LossModel, shards: Sequence[DataShard], theta_star,
         aggregate: Callable[[np.ndarray], np.ndarray]) -> list[RoundTrace]:
    if len(shards) != config.m:
        raise ValueError(f"got {len(shards)} shards for m={config.m}")
    W, Y = stack_shards(shards)
    if W.shape[0] * W.shape[1] != config.N:
        raise ValueError(f"shards hold {W.shape[0] * W.shape[1]} samples, expected N={config.N}")
    d = W.shape[2]
    theta_star = as_model_vector(theta_star, d)
    theta = config.initial_theta(d)
    attack = config.attack
    with_deviation = model.has_population_gradient

    traces = []
    for t in range(1, config.rounds + 1):
        start = time.perf_counter()
        honest = model.mean_gradients(W, Y, theta)
        if attack.strategy == "none":
            faulty = frozenset()
        else:
            faulty = select_fault_set(attack.policy, t, config.m)
        reports = apply_attack(attack, honest, faulty, t).reports
        agg = aggregate(reports)
        deviation = None
        if with_deviation:
            deviation = float(np.linalg.norm(agg - model.population_gradient(theta, theta_star)))
        theta = gd_step(theta, agg, config.eta)
        wall_ms = (time.perf_counter() - start) * 1e3
        traces.append(RoundTrace(t, theta, float(np.linalg.norm(theta - theta_star)),
                                 deviation, faulty, wall_ms, agg))
    return traces


def run_standard_bgd(config: RunConfig, model: LossModel, shards: Sequence[DataShard], theta_star) -> list[RoundTrace]:
    """Gradient descent on the plain average of the worker reports."""
    return _run(config, model, shards, theta_star, lambda reports: reports.mean(axis=0))


def run_byzantine_gd(config: RunConfig, model: LossModel, shards: Sequence[DataShard], theta_star) -> list[RoundTrace]:
    """Gradient descent on the geometric median of ``k`` batch means."""
    q = max(config.q, config.attack.q if config.attack.strategy != "none" else 0)
    if q > 0 and 2 * q >= config.k:
        warnings.warn(f"k={config.k} batches with q={q} faulty workers: need 2(1+eps)q <= k for the "
                      "convergence guarantee", RuntimeWarning, stacklevel=2)
    cfg = config.aggregator
    return _run(config, model, shards, theta_star, lambda reports: median_of_means(reports, cfg))


def run_population_gd(model: LossModel, theta0, theta_star, eta: float, rounds: int) -> np.ndarray:
    """Iterates of exact gradient descent on the population risk, shape (rounds + 1, d)."""
    theta_star = as_model_vector(theta_star)
    theta = as_model_vector(theta0, theta_star.shape[0])
    out = [theta]
    for _ in range(rounds):
        theta = gd_step(theta, model.population_gradient(theta, theta_star), eta)
        out.append(theta)
    return np.stack(out)


def write_trace_csv(traces: Sequence[RoundTrace], path, record_wall_time: bool = True) -> None:
    """One row per round. Absent deviations are empty cells; wall time is 0 when not recorded."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for tr in traces:
            writer.writerow([
                tr.t,
                repr(tr.error),
                "" if tr.agg_deviation is None else repr(tr.agg_deviation),
                len(tr.fault_set),
                repr(round(tr.wall_ms, 3)) if record_wall_time else "0",
            ])


def read_trace_csv(path) -> list[dict]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({
            "round": int(row["round"]),
            "error": float(row["error"]),
            "agg_deviation": float(row["agg_deviation"]) if row["agg_deviation"] else None,
            "n_byzantine": int(row["n_byzantine"]),
            "wall_ms": float(row["wall_ms"]),
        })
    return out
