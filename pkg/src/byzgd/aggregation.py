"""Geometric median, norm trimming and the median-of-means gradient aggregator."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Relative distance below which an iterate is treated as sitting on a data point.
COINCIDE_RTOL = 1e-12


class AllTrimmedError(ValueError):
    """Every point was removed by norm trimming."""


@dataclass(frozen=True)
class AggregatorConfig:
    k: int = 1
    gamma: float | None = None  # None -> 1/N once N is known, 0 for a bare median call
    tau: float | None = None
    max_iterations: int = 200
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be > 0 when given")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be >= 0")

    def with_gamma(self, gamma: float) -> "AggregatorConfig":
        return AggregatorConfig(self.k, gamma, self.tau, self.max_iterations, self.tolerance)


@dataclass(frozen=True)
class MedianResult:
    point: np.ndarray
    objective: float
    iterations_used: int
    certified_ratio: float
    objective_history: tuple[float, ...] = field(default=(), repr=False)


def _as_points(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("need a non-empty list of points with a common dimension")
    if not np.all(np.isfinite(P)):
        raise ValueError("points have non-finite coordinates")
    return P


def median_objective(points, y) -> float:
    """Sum of Euclidean distances from ``y`` to every point."""
    P = _as_points(points)
    return float(np.linalg.norm(P - np.asarray(y, float), axis=1).sum())


def _certify(P: np.ndarray, y: np.ndarray, scale: float):
    """Objective at ``y``, a lower bound on the optimum, and the coinciding-point data.

    The optimum lies in the convex hull of ``P``. For any hull point x,
    f(x) >= f(y) - |g| |x - y| >= f(y) - |g| max_i |z_i - y| where g is the
    minimum-norm subgradient of f at y.
    """
    diff = P - y
    dist = np.linalg.norm(diff, axis=1)
    obj = float(dist.sum())
    on_point = dist <= COINCIDE_RTOL * scale
    mult = int(on_point.sum())
    far = ~on_point
    R = (diff[far] / dist[far, None]).sum(axis=0) if far.any() else np.zeros_like(y)
    r_norm = float(np.linalg.norm(R))
    g_norm = max(r_norm - mult, 0.0)
    lower = obj - g_norm * float(dist.max())
    return obj, lower, dist, on_point, mult, r_norm


def _ratio(upper: float, lower: float) -> float:
    if upper <= lower or upper == 0.0:
        return 1.0
    return upper / lower if lower > 0 else np.inf


def geometric_median(points, cfg: AggregatorConfig | None = None) -> MedianResult:
    """Approximate geometric median by iteratively reweighted averaging.

    Starts from the coordinate-wise median and applies the Weiszfeld map with
    the Vardi-Zhang correction when an iterate lands on a data point. The data
    point nearest each iterate is also scored, since the optimum often sits
    exactly on one. Stops once the best objective is certified within
    ``1 + gamma`` of optimal, the relative step falls below ``tolerance``, or
    ``max_iterations`` is hit. The best candidate seen is returned;
    ``certified_ratio`` bounds its objective over the optimum.
    """
    cfg = cfg or AggregatorConfig()
    gamma = cfg.gamma or 0.0
    P = _as_points(points)
    n = P.shape[0]
    scale = max(float(np.abs(P).max()), 1e-300)

    y = np.median(P, axis=0)
    obj, lower, dist, on_point, mult, r_norm = _certify(P, y, scale)
    best_obj, best_y, best_lower = obj, y, lower
    history = [obj]
    it = 0

    def consider(candidate_obj, candidate_lower, candidate):
        nonlocal best_obj, best_y, best_lower
        best_lower = max(best_lower, candidate_lower)
        if candidate_obj < best_obj:
            best_obj, best_y = candidate_obj, candidate

    if n > 1 and _ratio(best_obj, best_lower) > 1.0 + gamma:
        for it in range(1, cfg.max_iterations + 1):
            far = ~on_point
            w = 1.0 / dist[far]
            T = (w[:, None] * P[far]).sum(axis=0) / w.sum()
            if mult:
                if r_norm <= mult:
                    break  # y is an exact minimiser
                beta = mult / r_norm
                y_new = (1.0 - beta) * T + beta * y
            else:
                y_new = T
            step = float(np.linalg.norm(y_new - y))
            y = y_new
            obj, lower, dist, on_point, mult, r_norm = _certify(P, y, scale)
            history.append(obj)
            consider(obj, lower, y)
            if not mult:
                z = P[int(np.argmin(dist))]
                z_obj, z_lower, *_ = _certify(P, z, scale)
                consider(z_obj, z_lower, z)
            if _ratio(best_obj, best_lower) <= 1.0 + gamma:
                break
            if step <= cfg.tolerance * max(float(np.linalg.norm(y)), float(np.median(dist)), 1e-300):
                break

    return MedianResult(np.array(best_y, dtype=float), best_obj, it,
                        _ratio(best_obj, best_lower), tuple(history))


def trim_by_norm(points, tau: float) -> list[np.ndarray]:
    """Keep points with norm at most ``tau``, in order. Raises ``AllTrimmedError`` if none survive."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    kept = [np.asarray(z, float) for z in points if np.linalg.norm(z) <= tau]
    if not kept:
        raise AllTrimmedError(f"all {len(points)} points have norm > {tau}")
    return kept


def batch_means(gradients, k: int) -> np.ndarray:
    """Means over ``k`` contiguous equal batches of the worker-indexed gradients."""
    G = _as_points(gradients)
    m = G.shape[0]
    if not 1 <= k <= m or m % k:
        raise ValueError(f"k={k} must divide m={m}")
    return G.reshape(k, m // k, G.shape[1]).mean(axis=1)


def median_of_means(gradients, cfg: AggregatorConfig) -> np.ndarray:
    """Geometric median of the (optionally norm-trimmed) batch means.

    ``k = 1`` returns the plain average of all reports, computed exactly as
    ``mean(axis=0)``.
    """
    G = _as_points(gradients)
    if cfg.k == 1:
        if G.shape[0] < 1:
            raise ValueError("no gradients")
        return G.mean(axis=0)
    means = batch_means(G, cfg.k)
    if cfg.tau is not None:
        try:
            means = np.stack(trim_by_norm(means, cfg.tau))
        except AllTrimmedError:
            log.warning("all %d batch means exceed tau=%g; using untrimmed means", len(means), cfg.tau)
    return geometric_median(means, cfg).point


def c_alpha(alpha: float) -> float:
    """Robustness amplification ``2(1 - alpha) / (1 - 2 alpha)`` for alpha in (0, 1/2)."""
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    return 2.0 * (1.0 - alpha) / (1.0 - 2.0 * alpha)


def robustness_radius(points, alpha: float, r: float, gamma: float) -> float:
    """Norm bound ``C_alpha r + gamma max|z_i| / (1 - 2 alpha)`` on a (1+gamma)-approximate median."""
    P = _as_points(points)
    norms = np.linalg.norm(P, axis=1)
    if np.count_nonzero(norms <= r) < (1.0 - alpha) * P.shape[0]:
        raise ValueError("fewer than (1 - alpha) n points lie within radius r")
    return c_alpha(alpha) * r + gamma * float(norms.max()) / (1.0 - 2.0 * alpha)


def check_robustness_bound(points, alpha: float, r: float, result: MedianResult, gamma: float) -> bool:
    return bool(np.linalg.norm(result.point) <= robustness_radius(points, alpha, r, gamma))
