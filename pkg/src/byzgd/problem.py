"""Statistical learning problem: loss models, synthetic data, sharding.

Model vectors are 1-D float arrays. A dataset is held as a covariate matrix
plus a response vector rather than a list of per-sample objects; ``Sample``
exists for the single-sample API.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


def derive_seed_sequence(seed: int, purpose: str, *ids: int) -> np.random.SeedSequence:
    """Stable child seed for ``(seed, purpose, ids...)``.

    The purpose tag is hashed with BLAKE2 so the result does not depend on
    Python's randomized ``hash`` or on the order streams are requested in.
    """
    tag = int.from_bytes(hashlib.blake2b(purpose.encode(), digest_size=8).digest(), "little")
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag, *[int(i) for i in ids]])


def derive_rng(seed: int, purpose: str, *ids: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed_sequence(seed, purpose, *ids))


def as_model_vector(theta, d: int | None = None) -> np.ndarray:
    """Validate and copy ``theta`` into a finite 1-D float array."""
    v = np.atleast_1d(np.array(theta, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"model vector must be 1-D, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"model vector has length {v.shape[0]}, expected {d}")
    if not np.all(np.isfinite(v)):
        raise ValueError("model vector has non-finite entries")
    return v


class Sample(NamedTuple):
    covariate: np.ndarray
    response: float


@dataclass(frozen=True)
class Dataset:
    """``n`` samples stored row-wise: ``covariates`` is (n, d), ``responses`` is (n,)."""

    covariates: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.covariates, dtype=float)
        y = np.asarray(self.responses, dtype=float)
        if w.ndim != 2 or y.ndim != 1 or w.shape[0] != y.shape[0]:
            raise ValueError(f"inconsistent dataset shapes {w.shape} and {y.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(y))):
            raise ValueError("dataset has non-finite values")
        object.__setattr__(self, "covariates", w)
        object.__setattr__(self, "responses", y)

    def __len__(self) -> int:
        return self.responses.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.covariates[i], float(self.responses[i]))

    def samples(self) -> list[Sample]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        if not samples:
            raise ValueError("no samples")
        return cls(np.stack([np.asarray(s.covariate, float) for s in samples]),
                   np.array([s.response for s in samples], dtype=float))


@dataclass(frozen=True)
class DataShard:
    worker_id: int
    data: Dataset

    def __len__(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class ProblemSpec:
    """Loss-model constants.

    ``L``/``M`` are the strong-convexity and gradient-Lipschitz constants of the
    population risk, ``sigma*``/``alpha*`` the sub-exponential parameters of the
    sample gradient and its increment, and ``r`` the radius parameter of the
    parameter domain ``{theta : |theta - theta*| <= r sqrt(d)}``.
    """

    d: int
    L: float
    M: float
    sigma1: float
    alpha1: float
    sigma2: float
    alpha2: float
    r: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        for name in ("L", "M", "sigma1", "alpha1", "sigma2", "alpha2", "r"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.L > self.M:
            raise ValueError("need L <= M")


class LossModel:
    """Per-sample loss with optional closed-form population gradient.

    Subclasses implement ``loss`` and ``gradients`` on batches of samples.
    ``population_gradient`` raises ``NotImplementedError`` unless overridden.
    """

    spec: ProblemSpec

    def loss(self, covariates: np.ndarray, responses: np.ndarray, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, covariates: np.ndarray, responses: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Per-sample gradients, shape (n, d)."""
        raise NotImplementedError

    def mean_gradients(self, covariates: np.ndarray, responses: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Mean gradient per leading group.

        ``covariates`` has shape (..., n, d) and ``responses`` (..., n); the
        result has shape (..., d).
        """
        return self.gradients(covariates, responses, theta).mean(axis=-2)

    def population_gradient(self, theta: np.ndarray, theta_star: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form population gradient")

    @property
    def has_population_gradient(self) -> bool:
        return type(self).population_gradient is not LossModel.population_gradient


@dataclass(frozen=True)
class LinearRegression(LossModel):
    """Squared loss ``0.5 * (<w, theta> - y)**2`` with standard Gaussian design."""

    d: int
    r: float = 1.0
    spec: ProblemSpec = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "spec", ProblemSpec(
            d=self.d, L=1.0, M=1.0,
            sigma1=math.sqrt(2.0), alpha1=math.sqrt(2.0),
            sigma2=math.sqrt(8.0), alpha2=8.0, r=self.r,
        ))

    def loss(self, covariates, responses, theta):
        resid = covariates @ theta - responses
        return 0.5 * resid**2

    def gradients(self, covariates, responses, theta):
        resid = covariates @ theta - responses
        return covariates * resid[..., None]

    def mean_gradients(self, covariates, responses, theta):
        # avoids materialising the per-sample gradient tensor
        resid = covariates @ theta - responses
        n = responses.shape[-1]
        return np.einsum("...nd,...n->...d", covariates, resid) / n

    def population_gradient(self, theta, theta_star):
        return np.asarray(theta, float) - np.asarray(theta_star, float)


def generate_linear_regression(theta_star, n: int, rng_seed: int, noise_scale: float = 1.0) -> Dataset:
    """Draw ``y = <w, theta*> + zeta`` with ``w ~ N(0, I)`` and ``zeta ~ N(0, 1)``.

    Covariates and noise come from separate streams derived from ``rng_seed``.
    ``noise_scale`` multiplies the noise (0 gives noiseless responses; 1 is the
    model proper).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    theta_star = as_model_vector(theta_star)
    d = theta_star.shape[0]
    w = derive_rng(rng_seed, "covariates").standard_normal((n, d))
    zeta = derive_rng(rng_seed, "noise").standard_normal(n)
    return Dataset(w, w @ theta_star + noise_scale * zeta)


def random_theta_star(d: int, norm: float, seed: int) -> np.ndarray:
    """A uniformly random direction in R^d scaled to ``norm``."""
    v = derive_rng(seed, "theta_star").standard_normal(d)
    return norm * v / np.linalg.norm(v)


def _check_dims(model: LossModel, theta: np.ndarray, d: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.shape[0] != d:
        raise ValueError(f"theta has shape {theta.shape}, data has dimension {d}")
    if hasattr(model, "spec") and model.spec.d != d:
        raise ValueError(f"loss model dimension {model.spec.d} != data dimension {d}")
    return theta


def sample_gradient(model: LossModel, x: Sample, theta) -> np.ndarray:
    w = np.asarray(x.covariate, dtype=float)
    if w.ndim != 1:
        raise ValueError("covariate must be 1-D")
    theta = _check_dims(model, theta, w.shape[0])
    return model.gradients(w[None, :], np.array([x.response]), theta)[0]


def local_empirical_gradient(model: LossModel, shard: DataShard | Dataset, theta) -> np.ndarray:
    data = shard.data if isinstance(shard, DataShard) else shard
    if len(data) == 0:
        raise ValueError("empty shard")
    theta = _check_dims(model, theta, data.d)
    return model.mean_gradients(data.covariates, data.responses, theta)


def population_gradient(model: LossModel, theta, theta_star) -> np.ndarray:
    return model.population_gradient(np.asarray(theta, float), np.asarray(theta_star, float))


def shard_dataset(data: Dataset, m: int) -> list[DataShard]:
    """Split into ``m`` contiguous equal shards; ``len(data)`` must be divisible by ``m``."""
    n = len(data)
    if m < 1 or n % m:
        raise ValueError(f"N={n} is not divisible by m={m}")
    size = n // m
    return [
        DataShard(j, Dataset(data.covariates[j * size:(j + 1) * size],
                             data.responses[j * size:(j + 1) * size]))
        for j in range(m)
    ]


def stack_shards(shards: Sequence[DataShard]) -> tuple[np.ndarray, np.ndarray]:
    """Shard arrays stacked in worker order: (m, n, d) covariates, (m, n) responses."""
    ordered = sorted(shards, key=lambda s: s.worker_id)
    sizes = {len(s) for s in ordered}
    if len(sizes) != 1:
        raise ValueError(f"shards have unequal sizes {sorted(sizes)}")
    return (np.stack([s.data.covariates for s in ordered]),
            np.stack([s.data.responses for s in ordered]))


def save_dataset_csv(data: Dataset, path) -> None:
    """Headerless CSV, d covariate columns then the response, round-trip precision."""
    table = np.column_stack([data.covariates, data.responses])
    np.savetxt(Path(path), table, delimiter=",", fmt="%.17g")


def load_dataset_csv(path) -> Dataset:
    table = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    if table.shape[1] < 2:
        raise ValueError("dataset CSV needs at least one covariate and one response column")
    return Dataset(table[:, :-1], table[:, -1])
