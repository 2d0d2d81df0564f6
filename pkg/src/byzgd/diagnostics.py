"""Theory-side calculators and Monte Carlo checks.

All logarithms are natural. The constants follow the uniform-convergence
analysis of median-of-means gradient descent: ``Delta1``/``Delta1_prime``
bound the gradient noise at the optimum and of the gradient increment,
``Delta2`` the increment uniformly over the parameter ball, and
``xi1``/``xi2`` the resulting batch-deviation envelope
``C_alpha |Z(theta)| <= xi2 |theta - theta*| + xi1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .aggregation import c_alpha
from .problem import (Dataset, LossModel, ProblemSpec, derive_rng,
                      generate_linear_regression, shard_dataset, stack_shards)


def binary_divergence(delta_prime: float, delta: float) -> float:
    """KL divergence between Bernoulli(delta_prime) and Bernoulli(delta)."""
    if not (0 < delta_prime < 1 and 0 < delta < 1):
        raise ValueError("binary divergence arguments must lie in (0, 1)")
    return (delta_prime * math.log(delta_prime / delta)
            + (1 - delta_prime) * math.log((1 - delta_prime) / (1 - delta)))


def delta1(n: float, d: int, delta: float, sigma1: float) -> float:
    return math.sqrt(2.0) * sigma1 * math.sqrt((d * math.log(6.0) + math.log(3.0 / delta)) / n)


def delta1_prime(n: float, d: int, delta: float, sigma2: float) -> float:
    return delta1(n, d, delta, sigma2)


def m_prime_gaussian(n: float, d: int, delta: float) -> float:
    """High-probability bound on |(1/n) W W^T| for an n x d standard Gaussian design."""
    return (math.sqrt(n) + math.sqrt(d) + math.sqrt(2.0 * math.log(4.0 / delta))) ** 2 / n


def delta2(n: float, d: int, delta: float, spec: ProblemSpec, m_prime: float) -> float:
    inner = (d * math.log(18.0 * max(spec.M, m_prime) / spec.sigma2)
             + 0.5 * d * math.log(n / d)
             + math.log(6.0 * spec.sigma2**2 * spec.r * math.sqrt(n)
                        / (spec.alpha2 * spec.sigma1 * delta)))
    if inner < 0:
        raise ValueError(f"Delta2 undefined at n={n}, d={d}: log terms sum to {inner:.3g} < 0")
    return spec.sigma2 * math.sqrt(2.0 / n) * math.sqrt(inner)


def population_contraction(L: float, M: float) -> float:
    """Per-step contraction of exact gradient descent with step L / (2 M^2)."""
    return math.sqrt(1.0 - L**2 / (4.0 * M**2))


def rho(L: float, M: float, xi2: float) -> float:
    return 1.0 - population_contraction(L, M) - xi2 * L / (2.0 * M**2)


@dataclass(frozen=True)
class TheoryConstants:
    n: float
    alpha: float
    delta: float
    C_alpha: float
    Delta1: float
    Delta1_prime: float
    Delta2: float
    M_prime: float
    xi1: float
    xi2: float
    rho: float
    eta: float
    floor: float  # eta * xi1 / rho; inf when rho <= 0
    good_event_prob_lower: float
    small_deviation_ok: bool  # Delta1 <= sigma1^2/alpha1 and Delta2 <= sigma2^2/alpha2

    @property
    def rho_positive(self) -> bool:
        return self.rho > 0

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def compute_constants(spec: ProblemSpec, config, alpha: float, delta: float,
                      m_prime: float | None = None) -> TheoryConstants:
    """Evaluate the convergence constants at batch sample size ``n = N/k``.

    ``config`` needs ``N``, ``k``, ``q`` and ``eta``. ``m_prime`` defaults to the
    Gaussian-design bound evaluated at the same ``delta``.
    """
    N, k, q, eta = config.N, config.k, config.q, config.eta
    n = N / k
    if n < 1:
        raise ValueError("need N/k >= 1")
    frac = q / k
    if not frac < alpha < 0.5:
        raise ValueError(f"alpha={alpha} must lie in (q/k, 1/2) = ({frac:.6g}, 0.5)")
    if not 0 < delta <= alpha - frac + 1e-12:
        raise ValueError(f"delta={delta} must lie in (0, alpha - q/k] = (0, {alpha - frac:.6g}]")
    d = spec.d
    ca = c_alpha(alpha)
    d1 = delta1(n, d, delta, spec.sigma1)
    d1p = delta1_prime(n, d, delta, spec.sigma2)
    mp = m_prime_gaussian(n, d, delta) if m_prime is None else m_prime
    d2 = delta2(n, d, delta, spec, mp)
    xi1 = 4.0 * ca * d1
    xi2 = 8.0 * ca * d2
    r = rho(spec.L, spec.M, xi2)
    floor = eta * xi1 / r if r > 0 else math.inf
    gap = alpha - frac
    prob = 1.0 - math.exp(-k * binary_divergence(gap, delta)) if gap < 1 else 1.0
    ok = d1 <= spec.sigma1**2 / spec.alpha1 and d2 <= spec.sigma2**2 / spec.alpha2
    return TheoryConstants(n, alpha, delta, ca, d1, d1p, d2, mp, xi1, xi2, r, eta, floor, prob, ok)


def batch_deviation(batch: Sequence | Dataset, theta, theta_star, model: LossModel) -> np.ndarray:
    """Batch-mean gradient minus the population gradient at ``theta``.

    ``batch`` is a Dataset or a sequence of equally sized shards.
    """
    if isinstance(batch, Dataset):
        W, Y = batch.covariates, batch.responses
    else:
        W, Y = stack_shards(batch)
        W, Y = W.reshape(-1, W.shape[-1]), Y.reshape(-1)
    theta = np.asarray(theta, dtype=float)
    return model.mean_gradients(W, Y, theta) - model.population_gradient(theta, np.asarray(theta_star, float))


def default_theta_grid(theta_star, theta0, r: float, n_random: int = 64, seed: int = 0) -> list[np.ndarray]:
    """theta*, theta0 and ``n_random`` uniform draws from the ball of radius r*sqrt(d) around theta*."""
    theta_star = np.asarray(theta_star, dtype=float)
    d = theta_star.shape[0]
    rng = derive_rng(seed, "theta_grid")
    dirs = rng.standard_normal((n_random, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = r * math.sqrt(d) * rng.uniform(size=n_random) ** (1.0 / d)
    return [theta_star.copy(), np.asarray(theta0, dtype=float)] + list(theta_star + radii[:, None] * dirs)


@dataclass(frozen=True)
class GoodEventEstimate:
    frequency: float
    satisfied_counts: tuple[int, ...]  # per resample: batches meeting the envelope on the whole grid
    threshold: float  # k(1 - alpha) + q


def good_batches(batches_W: np.ndarray, batches_Y: np.ndarray, model: LossModel, theta_star,
                 constants: TheoryConstants, theta_grid: Sequence) -> np.ndarray:
    """Mask of batches whose deviation satisfies the envelope at every grid point.

    ``batches_W`` is (k, n, d), ``batches_Y`` is (k, n).
    """
    theta_star = np.asarray(theta_star, dtype=float)
    ok = np.ones(batches_W.shape[0], dtype=bool)
    for theta in theta_grid:
        theta = np.asarray(theta, dtype=float)
        Z = model.mean_gradients(batches_W, batches_Y, theta) - model.population_gradient(theta, theta_star)
        lhs = constants.C_alpha * np.linalg.norm(Z, axis=1)
        ok &= lhs <= constants.xi2 * np.linalg.norm(theta - theta_star) + constants.xi1
    return ok


def estimate_good_event(model: LossModel, theta_star, N: int, k: int, q: int,
                        constants: TheoryConstants, theta_grid: Sequence, resamples: int = 200,
                        seed: int = 0,
                        sampler: Callable[[np.ndarray, int, int], Dataset] = generate_linear_regression,
                        ) -> GoodEventEstimate:
    """Fraction of fresh datasets on which at least ``k(1 - alpha) + q`` batches are good.

    Uniformity over the parameter set is approximated by ``theta_grid``.
    """
    if N % k:
        raise ValueError(f"k={k} must divide N={N}")
    threshold = k * (1.0 - constants.alpha) + q
    counts = []
    for i in range(resamples):
        data = sampler(theta_star, N, int(derive_rng(seed, "good_event", i).integers(2**63)))
        W = data.covariates.reshape(k, N // k, -1)
        Y = data.responses.reshape(k, N // k)
        counts.append(int(good_batches(W, Y, model, theta_star, constants, theta_grid).sum()))
    hits = sum(c >= threshold - 1e-9 for c in counts)
    return GoodEventEstimate(hits / resamples, tuple(counts), threshold)


# Linear-regression assumption checks -------------------------------------------------

def _chunks(n: int, size: int = 100_000):
    for start in range(0, n, size):
        yield min(size, n - start)


def gradient_mgf(model: LossModel, theta_star, lam: float, directions, n: int = 1_000_000,
                 seed: int = 0) -> np.ndarray:
    """Empirical E exp(lam <grad f(X, theta*), v>) for each unit direction v."""
    theta_star = np.asarray(theta_star, dtype=float)
    V = np.atleast_2d(np.asarray(directions, dtype=float))
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    total = np.zeros(V.shape[0])
    for c, size in enumerate(_chunks(n)):
        data = generate_linear_regression(theta_star, size, int(derive_rng(seed, "mgf1", c).integers(2**63)))
        g = model.gradients(data.covariates, data.responses, theta_star)
        total += np.exp(lam * (g @ V.T)).sum(axis=0)
    return total / n


def increment_mgf(model: LossModel, theta, theta_star, lam: float, directions, n: int = 1_000_000,
                  seed: int = 0) -> np.ndarray:
    """Empirical E exp(lam <h - E h, v> / |theta - theta*|) with h = grad f(X, theta) - grad f(X, theta*)."""
    theta = np.asarray(theta, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    dist = np.linalg.norm(theta - theta_star)
    if dist == 0:
        raise ValueError("theta must differ from theta*")
    V = np.atleast_2d(np.asarray(directions, dtype=float))
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    mean_h = model.population_gradient(theta, theta_star) - model.population_gradient(theta_star, theta_star)
    total = np.zeros(V.shape[0])
    for c, size in enumerate(_chunks(n)):
        data = generate_linear_regression(theta_star, size, int(derive_rng(seed, "mgf2", c).integers(2**63)))
        h = (model.gradients(data.covariates, data.responses, theta)
             - model.gradients(data.covariates, data.responses, theta_star))
        total += np.exp(lam * ((h - mean_h) @ V.T) / dist).sum(axis=0)
    return total / n


def spectral_bound_frequency(n: int, d: int, delta: float, trials: int = 200, seed: int = 0) -> float:
    """Fraction of Gaussian designs with |(1/n) W W^T| <= m_prime_gaussian(n, d, delta)."""
    bound = m_prime_gaussian(n, d, delta)
    hits = 0
    for i in range(trials):
        W = derive_rng(seed, "spectral", i).standard_normal((n, d))
        hits += np.linalg.eigvalsh(W.T @ W / n)[-1] <= bound
    return hits / trials


def shard_batches(data: Dataset, m: int, k: int) -> list[list]:
    """Shards of ``data`` grouped into ``k`` contiguous batches of ``m/k`` workers."""
    shards = shard_dataset(data, m)
    b = m // k
    return [shards[i * b:(i + 1) * b] for i in range(k)]
