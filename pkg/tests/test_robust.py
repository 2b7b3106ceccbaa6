"""Tests for the robust feature, approximate mean, and robust update."""

import math

import numpy as np
import pytest

from rgf.distributions import CauchyDensity, GaussianDensity, standard_normal
from rgf.gf import (
    ExactLinearBackend,
    GaussianBelief,
    MonteCarloBackend,
    UnscentedBackend,
    predict,
    update,
)
from rgf.models import (
    LinearGaussianSensor,
    RadarConstants,
    ShiftedTail,
    linear_example_sensor,
    linear_example_transition,
    radar_initial_belief,
    radar_rgf_sensor,
)
from rgf.robust import (
    FeatureContext,
    approx_posterior_mean,
    feature,
    gaussian_conditioning,
    predict_body_moments,
    rgf_step,
    rgf_update,
)

# Scalar random-walk setting one step in: predicted belief N(0, 2), body
# N(y | x, 1), Cauchy tail with scale 10 and weight 0.1.
PRIOR_MEAN, PRIOR_VAR = 0.0, 2.0
BODY_VAR, OMEGA, GAMMA = 1.0, 0.1, 10.0


def example_context() -> FeatureContext:
    tail = ShiftedTail(lambda x: x, CauchyDensity([0.0], [GAMMA]))
    return FeatureContext([PRIOR_MEAN], [0.0], [[PRIOR_VAR + BODY_VAR]], tail, OMEGA)


def quadrature_posterior_mean(y: float) -> float:
    """Brute-force Bayes posterior mean with a state-independent Cauchy tail.

    Trapezoid quadrature of x * p(y|x) p(x) / int p(y|x) p(x) over
    x in [-12, 12] with 1e5 points; the tail is pinned at the predicted
    mean, matching the model the approximate mean is derived for.
    """
    xs = np.linspace(-12.0, 12.0, 100_000)
    prior = np.exp(-0.5 * (xs - PRIOR_MEAN) ** 2 / PRIOR_VAR)
    body = np.exp(-0.5 * (y - xs) ** 2 / BODY_VAR) / math.sqrt(2 * math.pi * BODY_VAR)
    tail = (1.0 / (math.pi * GAMMA)) / (1.0 + ((y - PRIOR_MEAN) / GAMMA) ** 2)
    lik = (1.0 - OMEGA) * body + OMEGA * tail
    weights = lik * prior
    return float(np.trapezoid(xs * weights, xs) / np.trapezoid(weights, xs))


class TestFeature:
    def test_zero_weight_collapses_to_identity(self):
        ctx = FeatureContext([0.0], [0.0], [[3.0]], example_context().tail, 0.0)
        for y in (0.0, 1.5, -7.0, 1e6):
            phi = feature([y], ctx)
            assert phi.c0 == 1.0
            assert phi.c1[0] == y
            assert phi.c2 == 0.0

    def test_full_weight_collapses_to_tail(self):
        ctx = FeatureContext([0.0], [0.0], [[3.0]], example_context().tail, 1.0)
        phi = feature([2.0], ctx)
        assert (phi.c0, phi.c1[0], phi.c2) == (0.0, 0.0, 1.0)

    def test_extreme_measurement_saturates_exactly(self):
        ctx = example_context()
        for y in (1e6, -1e6, 1e12):
            phi = feature([y], ctx)
            assert phi.c0 == 0.0
            assert phi.c1[0] == 0.0
            assert phi.c2 == 1.0

    def test_center_value_against_direct_formula(self):
        ctx = example_context()
        phi = feature([0.0], ctx)
        b = (1 - OMEGA) / math.sqrt(2 * math.pi * 3.0)
        t = OMEGA / (GAMMA * math.pi)
        assert phi.c0 == pytest.approx(b / (b + t), rel=1e-12)
        assert phi.c2 == pytest.approx(t / (b + t), rel=1e-12)
        assert phi.c1[0] == 0.0

    def test_normalization_identities_random_contexts(self):
        rng = np.random.default_rng(2024)
        for _ in range(2000):
            m = int(rng.integers(1, 4))
            n = int(rng.integers(1, 4))
            sqrt_c = rng.normal(size=(m, m))
            cov = sqrt_c @ sqrt_c.T + 0.1 * np.eye(m)
            tail = ShiftedTail(
                lambda x, m=m: np.broadcast_to(x[..., :1], x.shape[:-1] + (m,)),
                CauchyDensity(np.zeros(m), rng.uniform(0.5, 30.0, size=m)),
            )
            ctx = FeatureContext(
                rng.normal(size=n), rng.normal(size=m), cov, tail, rng.uniform(0.0, 1.0)
            )
            y = rng.standard_cauchy(size=m) * 10.0 ** rng.integers(-1, 6)
            phi = feature(y, ctx)
            assert phi.c0 + phi.c2 == 1.0
            np.testing.assert_array_equal(phi.c1, y * phi.c0)
            assert 0.0 <= phi.c0 <= 1.0
            assert 0.0 <= phi.c2 <= 1.0
            assert np.all(np.isfinite(phi.to_array()))

    def test_batched_matches_scalar_calls(self):
        ctx = example_context()
        ys = np.linspace(-40, 40, 33)[:, None]
        batch = feature(ys, ctx).to_array()
        rows = np.array([feature(y, ctx).to_array() for y in ys])
        # BLAS blocking may differ between batched and single solves.
        np.testing.assert_allclose(batch, rows, rtol=1e-12, atol=1e-15)

    def test_to_array_layout(self):
        ctx = example_context()
        phi = feature([1.0], ctx)
        arr = phi.to_array()
        assert arr.shape == (3,)
        np.testing.assert_array_equal(arr, [phi.c0, phi.c1[0], phi.c2])

    def test_weight_bounds(self):
        with pytest.raises(ValueError):
            FeatureContext([0.0], [0.0], [[1.0]], example_context().tail, -0.1)


class TestGaussianConditioning:
    def test_scalar_example(self):
        sensor = LinearGaussianSensor([[1.0]], [0.0], [[1.0]])
        D, d = gaussian_conditioning([PRIOR_MEAN], [[PRIOR_VAR]], sensor)
        assert D[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert d[0] == pytest.approx(0.0, abs=1e-14)

    def test_matches_covariance_form(self):
        # Alternative identity: D = S A^T (A S A^T + P)^-1 and
        # d = m - D (A m + a); both routes must agree.
        rng = np.random.default_rng(5)
        for dx, dy in [(1, 1), (2, 2), (3, 2)]:
            A = rng.normal(size=(dy, dx))
            a = rng.normal(size=dy)
            sqrt_p = rng.normal(size=(dy, dy))
            P = sqrt_p @ sqrt_p.T + 0.5 * np.eye(dy)
            mean = rng.normal(size=dx)
            sqrt_s = rng.normal(size=(dx, dx))
            S = sqrt_s @ sqrt_s.T + 0.5 * np.eye(dx)
            D, d = gaussian_conditioning(mean, S, LinearGaussianSensor(A, a, P))
            D_alt = S @ A.T @ np.linalg.inv(A @ S @ A.T + P)
            d_alt = mean - D_alt @ (A @ mean + a)
            np.testing.assert_allclose(D, D_alt, rtol=1e-9, atol=1e-11)
            np.testing.assert_allclose(d, d_alt, rtol=1e-9, atol=1e-11)


class TestApproxPosteriorMean:
    def setup_method(self):
        sensor = LinearGaussianSensor([[1.0]], [0.0], [[BODY_VAR]])
        self.D, self.d = gaussian_conditioning([PRIOR_MEAN], [[PRIOR_VAR]], sensor)
        self.ctx = example_context()

    def test_zero_weight_is_exact_gaussian_conditioning(self):
        ctx0 = FeatureContext([PRIOR_MEAN], [0.0], [[3.0]], self.ctx.tail, 0.0)
        for y in (-3.0, 0.5, 12.0):
            got = approx_posterior_mean([y], ctx0, self.D, self.d)
            assert got[0] == pytest.approx(self.d[0] + self.D[0, 0] * y, rel=1e-12)

    def test_outlier_redescends_to_prior_mean(self):
        got = approx_posterior_mean([20.0], self.ctx, self.D, self.d)
        assert abs(got[0] - PRIOR_MEAN) < 0.05

    def test_inlier_is_responsibility_scaled_kalman(self):
        phi = feature([1.0], self.ctx)
        got = approx_posterior_mean([1.0], self.ctx, self.D, self.d)
        assert got[0] == pytest.approx((2.0 / 3.0) * phi.c0, rel=1e-12)
        assert 0.3 < got[0] < 0.9

    def test_matches_quadrature_bayes_oracle(self):
        for y in (-8.0, -1.0, 0.0, 0.7, 2.0, 5.0, 12.0, 30.0):
            oracle = quadrature_posterior_mean(y)
            got = approx_posterior_mean([y], self.ctx, self.D, self.d)[0]
            assert abs(got - oracle) < 0.05, f"y={y}: {got} vs oracle {oracle}"


def test_uniform_tail_factorization_is_exact():
    # For a state-independent tail the Dirac treatment of the prior is an
    # identity: int f(x) t(y) p(x) dx == t(y) int f(x) p(x) dx.  Checked by
    # quadrature for an affine f and a uniform tail density.
    xs = np.linspace(-12.0, 12.0, 200_001)
    prior = np.exp(-0.5 * xs**2 / PRIOR_VAR) / math.sqrt(2 * math.pi * PRIOR_VAR)
    tail_height = 1.0 / 100.0  # uniform on [-50, 50]

    def tail_density(y, x):
        return tail_height if abs(y) <= 50.0 else 0.0

    f = lambda x: 1.7 * x + 0.3
    y = 4.2
    tail_vals = np.array([tail_density(y, x) for x in xs])
    lhs = np.trapezoid(f(xs) * tail_vals * prior, xs)
    rhs = tail_density(y, PRIOR_MEAN) * np.trapezoid(f(xs) * prior, xs)
    assert abs(lhs - rhs) < 1e-6


class TestPredictBodyMoments:
    def test_linear_example_first_step(self):
        belief = GaussianBelief([0.0], [[2.0]])
        mean, cov = predict_body_moments(
            belief, lambda x, w: x + w, standard_normal(1), ExactLinearBackend()
        )
        assert mean[0] == pytest.approx(0.0)
        assert cov[0, 0] == pytest.approx(3.0)

    def test_linear_body_marginalization_identity(self):
        rng = np.random.default_rng(12)
        A = rng.normal(size=(2, 3))
        a = rng.normal(size=2)
        sqrt_p = rng.normal(size=(2, 2))
        P = sqrt_p @ sqrt_p.T + 0.2 * np.eye(2)
        sqrt_s = rng.normal(size=(3, 3))
        S = sqrt_s @ sqrt_s.T + 0.2 * np.eye(3)
        mu = rng.normal(size=3)
        belief = GaussianBelief(mu, S)
        mean, cov = predict_body_moments(
            belief,
            lambda x, w: x @ A.T + a + w,
            GaussianDensity(np.zeros(2), P),
            ExactLinearBackend(),
        )
        np.testing.assert_allclose(mean, A @ mu + a, rtol=1e-12)
        np.testing.assert_allclose(cov, A @ S @ A.T + P, rtol=1e-12)

    def test_radar_body_backends_cross_validate(self):
        constants = RadarConstants()
        sensor = radar_rgf_sensor(constants)
        belief = radar_initial_belief()
        ut_mean, ut_cov = predict_body_moments(
            belief, sensor.body_fn, sensor.body_noise, UnscentedBackend()
        )
        n = 1_000_000
        mc_mean, mc_cov = predict_body_moments(
            belief, sensor.body_fn, sensor.body_noise, MonteCarloBackend(n, seed=77)
        )
        se_mean = np.sqrt(np.diag(mc_cov) / n)
        np.testing.assert_array_less(np.abs(ut_mean - mc_mean), 3 * se_mean)
        se_cov = np.sqrt(
            (np.outer(np.diag(mc_cov), np.diag(mc_cov)) + mc_cov**2) / n
        )
        np.testing.assert_array_less(np.abs(ut_cov - mc_cov), 3 * se_cov)


class TestRgfUpdate:
    def test_zero_weight_reduces_to_plain_gf_unscented(self):
        belief = GaussianBelief([0.0], [[2.0]])
        sensor = linear_example_sensor(tail_weight=0.0)
        for y in (-2.0, 0.3, 4.0):
            plain = update(
                belief, sensor.body_fn, sensor.body_noise, [y], UnscentedBackend()
            )
            robust = rgf_update(belief, sensor, [y], UnscentedBackend())
            np.testing.assert_allclose(robust.mean, plain.mean, atol=1e-8)
            np.testing.assert_allclose(robust.cov, plain.cov, atol=1e-8)

    def test_zero_weight_reduces_to_plain_gf_monte_carlo(self):
        # Both sides estimate the same update from independent draws of the
        # shared seed sequence, so they agree within Monte Carlo error.
        # The scatter is measured empirically across seeds.
        belief = GaussianBelief([0.0], [[2.0]])
        sensor = linear_example_sensor(tail_weight=0.0)
        n = 4000
        reps = np.array(
            [
                update(
                    belief, sensor.body_fn, sensor.body_noise, [1.0],
                    MonteCarloBackend(n, seed=100 + k),
                ).mean[0]
                for k in range(20)
            ]
        )
        se = reps.std(ddof=1)
        plain = update(
            belief, sensor.body_fn, sensor.body_noise, [1.0], MonteCarloBackend(n, seed=13)
        )
        robust = rgf_update(belief, sensor, [1.0], MonteCarloBackend(n, seed=13))
        assert abs(robust.mean[0] - plain.mean[0]) < 3 * math.sqrt(2.0) * se

    def test_outlier_leaves_prior(self):
        belief = GaussianBelief([0.0], [[2.0]])
        post = rgf_update(belief, linear_example_sensor(), [30.0], MonteCarloBackend(20_000, seed=3))
        assert abs(post.mean[0] - 0.0) < 0.1

    def test_inlier_tracks_like_scaled_kalman(self):
        belief = GaussianBelief([0.0], [[2.0]])
        post = rgf_update(belief, linear_example_sensor(), [1.0], MonteCarloBackend(20_000, seed=3))
        assert 0.3 < post.mean[0] < 0.9

    def test_posterior_covariance_is_measurement_independent(self):
        # The feature-space update computes one gain per step; only the
        # innovation depends on y, so the covariance cannot.
        belief = GaussianBelief([0.0], [[2.0]])
        sensor = linear_example_sensor()
        cov_inlier = rgf_update(belief, sensor, [1.0], MonteCarloBackend(5000, seed=8)).cov
        cov_outlier = rgf_update(belief, sensor, [30.0], MonteCarloBackend(5000, seed=8)).cov
        np.testing.assert_array_equal(cov_inlier, cov_outlier)
        assert cov_inlier[0, 0] < 2.0

    def test_redescending_posterior_mean(self):
        belief = GaussianBelief([0.0], [[2.0]])
        sensor = linear_example_sensor()
        means = {}
        for y in np.arange(10.0, 101.0, 10.0):
            post = rgf_update(belief, sensor, [y], MonteCarloBackend(100_000, seed=41))
            means[y] = abs(post.mean[0])
        ys = sorted(means)
        for lo in ys:
            for hi in ys:
                if hi >= lo:
                    assert means[hi] <= means[lo] + 0.05
        assert means[100.0] < 0.05

    def test_bounded_influence(self):
        belief = GaussianBelief([0.0], [[2.0]])
        sensor = linear_example_sensor()
        bound = 2.0 * math.sqrt(PRIOR_VAR)
        grid = np.concatenate([np.linspace(0.0, 30.0, 16), np.logspace(2, 6, 9)])
        grid = np.concatenate([-grid[::-1], grid])
        worst = 0.0
        for y in grid:
            post = rgf_update(belief, sensor, [y], MonteCarloBackend(5000, seed=2))
            worst = max(worst, abs(post.mean[0] - 0.0))
        assert worst < bound

    def test_exact_linear_backend_is_rejected(self):
        belief = GaussianBelief([0.0], [[2.0]])
        with pytest.raises(ValueError, match="affine"):
            rgf_update(belief, linear_example_sensor(), [1.0], ExactLinearBackend())

    def test_non_finite_measurement_rejected(self):
        belief = GaussianBelief([0.0], [[2.0]])
        with pytest.raises(ValueError, match="finite"):
            rgf_update(belief, linear_example_sensor(), [np.inf], UnscentedBackend())


def test_pseudo_moments_match_indicator_sampling():
    # The closed-form mixture combination must agree with brute-force
    # sampling of the branch indicator per draw.
    from rgf.robust import pseudo_measurement_moments

    belief = GaussianBelief([0.0], [[2.0]])
    sensor = linear_example_sensor()
    ctx = FeatureContext([0.0], [0.0], [[3.0]], sensor.tail, sensor.tail_weight)
    n = 200_000
    combined = pseudo_measurement_moments(belief, sensor, ctx, MonteCarloBackend(n, seed=5))

    rng = np.random.default_rng(6)
    xs = belief.sample(rng, n)
    us = rng.standard_normal((n, sensor.noise_dim_full))
    ys = sensor.measurement_from_normal(xs, us)
    zs = feature(ys, ctx).to_array()
    mean = zs.mean(axis=0)
    dev_z = zs - mean
    dev_x = xs - xs.mean(axis=0)
    cov = dev_z.T @ dev_z / (n - 1)
    cross = dev_x.T @ dev_z / (n - 1)

    np.testing.assert_allclose(combined.mean, mean, atol=0.05)
    np.testing.assert_allclose(combined.cov, cov, atol=0.05)
    np.testing.assert_allclose(combined.cross, cross, atol=0.05)


class TestRgfStep:
    def test_symmetric_measurement_keeps_zero_mean(self):
        belief = GaussianBelief([0.0], [[1.0]])
        post = rgf_step(
            belief, linear_example_transition(), linear_example_sensor(), [0.0],
            UnscentedBackend(),
        )
        assert abs(post.mean[0]) < 1e-8
        assert post.cov[0, 0] < 2.0

    def test_zero_weight_equals_gf_chain(self):
        belief = GaussianBelief([0.2], [[1.0]])
        sensor = linear_example_sensor(tail_weight=0.0)
        transition = linear_example_transition()
        stepped = rgf_step(belief, transition, sensor, [0.8], UnscentedBackend())
        predicted = predict(belief, transition, UnscentedBackend())
        chained = update(
            predicted, sensor.body_fn, sensor.body_noise, [0.8], UnscentedBackend()
        )
        np.testing.assert_allclose(stepped.mean, chained.mean, atol=1e-8)
        np.testing.assert_allclose(stepped.cov, chained.cov, atol=1e-8)
