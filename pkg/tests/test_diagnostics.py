import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from types import SimpleNamespace

import oracles
from byzgd.diagnostics import (GoodEventEstimate, batch_deviation, binary_divergence,
                               compute_constants, default_theta_grid, delta1, delta1_prime,
                               estimate_good_event, good_batches, gradient_mgf, increment_mgf,
                               m_prime_gaussian, rho, shard_batches, spectral_bound_frequency)
from byzgd.problem import (Dataset, LinearRegression, ProblemSpec, Sample, generate_linear_regression,
                           random_theta_star, sample_gradient)

SQRT2 = math.sqrt(2.0)


class TestBinaryDivergence:
    def test_zero_on_diagonal(self):
        for p in (0.01, 0.3, 0.5, 0.99):
            assert binary_divergence(p, p) == 0.0

    def test_value(self):
        assert binary_divergence(0.3, 0.1) == pytest.approx(0.1537, abs=5e-5)
        assert binary_divergence(0.3, 0.1) == pytest.approx(float(oracles.kl(0.3, 0.1)), rel=1e-12)

    def test_monotone(self):
        assert binary_divergence(0.4, 0.1) > binary_divergence(0.3, 0.1)

    @pytest.mark.parametrize("args", [(0.0, 0.1), (0.3, 1.0), (1.2, 0.5)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            binary_divergence(*args)


class TestFormulas:
    def test_delta1_example(self):
        expected = 2 * math.sqrt((10 * math.log(6) + math.log(60)) / 1000)
        assert delta1(1000, 10, 0.05, SQRT2) == pytest.approx(expected, rel=1e-12)
        assert delta1(1000, 10, 0.05, SQRT2) == pytest.approx(0.2967, abs=5e-5)

    def test_rho_without_xi2(self):
        assert rho(1.0, 1.0, 0.0) == pytest.approx(1 - math.sqrt(3) / 2, rel=1e-12)
        assert rho(1.0, 1.0, 0.0) == pytest.approx(0.1340, abs=5e-5)

    @settings(max_examples=50)
    @given(st.floats(1.0, 1e8), st.integers(1, 200), st.floats(1e-6, 0.5), st.floats(0.1, 10))
    def test_doubling_n_scales_delta1(self, n, d, delta, sigma):
        assert delta1(2 * n, d, delta, sigma) == pytest.approx(delta1(n, d, delta, sigma) / SQRT2, rel=1e-12)
        assert delta1_prime(2 * n, d, delta, sigma) == pytest.approx(
            delta1_prime(n, d, delta, sigma) / SQRT2, rel=1e-12)

    def test_m_prime_above_one(self):
        assert m_prime_gaussian(2000, 20, 0.05) > 1.0


def regression_consts(N, k, q, alpha, delta, d=20, r=1.0, eta=0.5):
    spec = LinearRegression(d, r=r).spec
    return compute_constants(spec, SimpleNamespace(N=N, k=k, q=q, eta=eta), alpha, delta)


class TestComputeConstants:
    def test_against_high_precision_oracle(self):
        d, N, k, q, alpha = 20, 24000, 12, 4, 0.35
        delta = alpha - q / k - 0.01
        r = 5 / math.sqrt(d)
        c = regression_consts(N, k, q, alpha, delta, d=d, r=r)
        n = N / k
        mp_ = oracles.m_prime(n, d, delta)
        d2 = oracles.delta2(n, d, delta, 1.0, mp_, SQRT2, math.sqrt(8), 8.0, r)
        ca = oracles.c_alpha(alpha)
        xi2 = 8 * ca * d2
        expect = {
            "C_alpha": ca, "Delta1": oracles.delta1(n, d, delta, SQRT2),
            "Delta1_prime": oracles.delta1(n, d, delta, math.sqrt(8)), "M_prime": mp_,
            "Delta2": d2, "xi1": 4 * ca * oracles.delta1(n, d, delta, SQRT2), "xi2": xi2,
            "rho": oracles.rho(1, 1, xi2),
            "good_event_prob_lower": oracles.good_event_lower(k, alpha - q / k, delta),
        }
        for name, value in expect.items():
            assert getattr(c, name) == pytest.approx(float(value), rel=1e-9), name
        assert c.rho < 0 and c.floor == math.inf

    def test_positive_rho_floor(self):
        c = regression_consts(4_000_000, 1, 0, 0.1, 0.05, d=1)
        assert c.rho_positive
        assert c.floor == pytest.approx(c.eta * c.xi1 / c.rho)

    def test_floor_scaling_in_n(self):
        """Delta1 and hence xi1 scale as sqrt(k/N)."""
        a = regression_consts(1_000_000, 2, 0, 0.2, 0.05, d=2)
        b = regression_consts(4_000_000, 2, 0, 0.2, 0.05, d=2)
        assert b.xi1 == pytest.approx(a.xi1 / 2, rel=1e-12)

    @pytest.mark.parametrize("alpha, delta", [(0.3, 0.05), (0.5, 0.1), (0.4, 0.2)])
    def test_invalid(self, alpha, delta):
        with pytest.raises(ValueError):
            regression_consts(24000, 12, 4, alpha, delta)

    def test_user_supplied_m_prime(self):
        c = compute_constants(LinearRegression(5).spec, SimpleNamespace(N=10000, k=4, q=0, eta=0.5),
                              0.2, 0.05, m_prime=3.0)
        assert c.M_prime == 3.0


class TestBatchDeviation:
    model = LinearRegression(3)

    def test_large_batch(self):
        ts = random_theta_star(3, 1.0, seed=1)
        data = generate_linear_regression(ts, 100_000, rng_seed=2)
        for theta in (ts, ts + np.array([1.0, 0.0, -2.0])):
            z = batch_deviation(data, theta, ts, self.model)
            assert np.linalg.norm(z) <= 0.05 * (1 + np.linalg.norm(theta - ts))

    def test_noise_free_at_optimum(self):
        ts = np.array([0.5, 0.5, 0.5])
        data = generate_linear_regression(ts, 50, rng_seed=3, noise_scale=0.0)
        assert np.allclose(batch_deviation(data, ts, ts, self.model), 0.0, atol=1e-14)

    def test_single_sample(self):
        s = Sample(np.array([1.0, -1.0, 2.0]), 0.7)
        theta, ts = np.array([0.1, 0.2, 0.3]), np.zeros(3)
        z = batch_deviation(Dataset.from_samples([s]), theta, ts, self.model)
        assert np.array_equal(z, sample_gradient(self.model, s, theta) - (theta - ts))

    def test_shard_sequence(self):
        data = generate_linear_regression(np.ones(3), 60, rng_seed=4)
        batches = shard_batches(data, 6, 3)
        theta = np.zeros(3)
        z = batch_deviation(batches[1], theta, np.ones(3), self.model)
        direct = batch_deviation(Dataset(data.covariates[20:40], data.responses[20:40]), theta, np.ones(3), self.model)
        assert np.allclose(z, direct, atol=1e-14)


class TestGoodEvent:
    model = LinearRegression(5)
    ts = random_theta_star(5, 1.0, seed=0)

    def consts(self, xi1, xi2, alpha=0.3):
        return SimpleNamespace(C_alpha=2.0, xi1=xi1, xi2=xi2, alpha=alpha)

    def grid(self):
        return default_theta_grid(self.ts, np.zeros(5), r=1.0, n_random=8)

    def test_vacuous(self):
        est = estimate_good_event(self.model, self.ts, 400, 4, 0, self.consts(1e9, 1e9), self.grid(), resamples=10)
        assert est.frequency == 1.0 and est.satisfied_counts == (4,) * 10

    def test_impossible(self):
        est = estimate_good_event(self.model, self.ts, 400, 4, 0, self.consts(0.0, 0.0), self.grid(), resamples=10)
        assert est.frequency == 0.0 and set(est.satisfied_counts) == {0}

    def test_single_batch_single_point_is_norm_check(self):
        data = generate_linear_regression(self.ts, 50, rng_seed=5)
        theta = self.ts + 0.5
        z = np.linalg.norm(data.covariates.T @ (data.covariates @ theta - data.responses) / 50 - (theta - self.ts))
        dist = np.linalg.norm(theta - self.ts)
        W, Y = data.covariates[None], data.responses[None]
        for xi1 in (2 * z - 0.3 * dist - 1e-9, 2 * z - 0.3 * dist + 1e-9):
            got = good_batches(W, Y, self.model, self.ts, self.consts(xi1, 0.3), [theta])[0]
            assert got == (2 * z <= 0.3 * dist + xi1)

    def test_grid(self):
        g = default_theta_grid(self.ts, np.ones(5), r=0.5, n_random=64, seed=3)
        assert len(g) == 66
        assert np.array_equal(g[0], self.ts) and np.array_equal(g[1], np.ones(5))
        assert all(np.linalg.norm(p - self.ts) <= 0.5 * math.sqrt(5) + 1e-12 for p in g[2:])


class TestAssumptionChecks:
    model = LinearRegression(4)
    ts = np.array([1.0, 0.0, -1.0, 0.5])

    def test_gradient_mgf_small(self):
        v = np.eye(4)
        mgf = gradient_mgf(self.model, self.ts, 0.5, v, n=200_000, seed=1)
        assert np.all(mgf <= math.exp(2 * 0.25 / 2) * 1.05)

    def test_increment_mgf_inside_domain(self):
        theta = self.ts + np.array([1.0, 0, 0, 0])
        v = np.vstack([np.eye(4)[0], np.ones(4)])
        mgf = increment_mgf(self.model, theta, self.ts, 1 / 8, v, n=200_000, seed=2)
        assert np.all(mgf <= math.exp(8 * (1 / 8) ** 2 / 2) * 1.05)

    def test_increment_needs_distinct_theta(self):
        with pytest.raises(ValueError):
            increment_mgf(self.model, self.ts, self.ts, 0.1, np.eye(4))

    def test_spectral(self):
        assert spectral_bound_frequency(500, 5, 0.05, trials=40) >= 0.95
