"""Byzantine fault injection.

The attacker picks the faulty set for each round and rewrites those workers'
reports. It sees every true local gradient of the current round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .problem import derive_rng

STRATEGIES = ("none", "sign_flip", "constant", "pull_toward", "omniscient_mean_shift")


@dataclass(frozen=True)
class FixedFaultSet:
    ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        if len(set(ids)) != len(ids):
            raise ValueError(f"fixed fault ids must be distinct, got {ids}")
        object.__setattr__(self, "ids", ids)

    @property
    def q(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class ResampledFaultSet:
    """A fresh uniformly random set of ``q`` workers every round."""

    q: int
    seed: int = 0

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be >= 0")


FaultSetPolicy = FixedFaultSet | ResampledFaultSet


@dataclass(frozen=True)
class AttackSpec:
    """Named Byzantine strategy plus fault-set policy.

    Parameters used per strategy: ``scale`` (sign_flip), ``vector``
    (constant), ``target`` and ``magnitude`` (pull_toward), ``target``
    (omniscient_mean_shift, the forced average).
    """

    strategy: str = "none"
    policy: FaultSetPolicy = field(default_factory=lambda: FixedFaultSet(()))
    scale: float = 1.0
    vector: tuple[float, ...] | None = None
    target: tuple[float, ...] | None = None
    magnitude: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.strategy == "constant" and self.vector is None:
            raise ValueError("constant strategy needs a vector")
        if self.strategy == "pull_toward" and self.target is None:
            raise ValueError("pull_toward strategy needs a target")
        for name in ("vector", "target"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in np.atleast_1d(v)))

    @property
    def q(self) -> int:
        return self.policy.q


def silent(d: int, policy: FaultSetPolicy) -> AttackSpec:
    """Workers that send nothing; the server substitutes the zero vector."""
    return AttackSpec("constant", policy, vector=(0.0,) * d)


@dataclass(frozen=True)
class RoundReports:
    reports: np.ndarray  # (m, d), worker-indexed
    byzantine_mask: np.ndarray  # (m,) bool

    @property
    def fault_set(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.byzantine_mask).tolist())


def select_fault_set(policy: FaultSetPolicy, round_t: int, m: int) -> frozenset[int]:
    """Faulty workers at round ``round_t``; deterministic in ``(policy, round_t)``."""
    if isinstance(policy, FixedFaultSet):
        bad = [i for i in policy.ids if not 0 <= i < m]
        if bad:
            raise ValueError(f"fault ids {bad} out of range for m={m}")
        return frozenset(policy.ids)
    if policy.q > m:
        raise ValueError(f"q={policy.q} exceeds m={m}")
    if policy.q == 0:
        return frozenset()
    rng = derive_rng(policy.seed, "fault_set", round_t)
    return frozenset(rng.choice(m, size=policy.q, replace=False).tolist())


def apply_attack(spec: AttackSpec, honest_gradients, fault_set: Iterable[int], round_t: int = 0) -> RoundReports:
    """Replace the faulty workers' reports according to ``spec.strategy``."""
    G = np.asarray(honest_gradients, dtype=float)
    m, d = G.shape
    faulty = sorted(set(int(j) for j in fault_set))
    if any(not 0 <= j < m for j in faulty):
        raise ValueError(f"fault set {faulty} out of range for m={m}")
    mask = np.zeros(m, dtype=bool)
    mask[faulty] = True
    reports = G.copy()
    if not faulty or spec.strategy == "none":
        return RoundReports(reports, mask)

    if spec.strategy == "sign_flip":
        bad = -spec.scale * G.mean(axis=0)
    elif spec.strategy == "constant":
        bad = _vector(spec.vector, d)
    elif spec.strategy == "pull_toward":
        direction = _vector(spec.target, d) - G.mean(axis=0)
        norm = np.linalg.norm(direction)
        bad = spec.magnitude * direction / norm if norm > 0 else np.zeros(d)
    else:  # omniscient_mean_shift
        target = _vector(spec.target, d) if spec.target is not None else np.zeros(d)
        honest_sum = G[~mask].sum(axis=0)
        bad = (m * target - honest_sum) / len(faulty)
    reports[mask] = bad
    return RoundReports(reports, mask)


def _vector(v, d: int) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape == (1,) and d > 1:
        arr = np.full(d, arr[0])
    if arr.shape != (d,):
        raise ValueError(f"attack vector has length {arr.shape[0]}, expected {d}")
    return arr
