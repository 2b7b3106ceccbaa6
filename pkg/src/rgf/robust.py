"""Feature-space robustification of the Gaussian filter.

A Gaussian filter updated with a fat-tailed sensor model sees a huge
(or infinite) measurement covariance and effectively discards every
measurement.  The fix implemented here filters with a *pseudo
measurement* instead: a time-varying feature of the physical
measurement whose components are

* ``c0`` - posterior probability that the measurement came from the body,
* ``c1 = y * c0`` - the measurement, gated by that responsibility,
* ``c2 = 1 - c0`` - the tail responsibility.

All three saturate for extreme measurements, so the state estimate has
bounded, redescending influence: inliers act like a normal Kalman
update and outliers leave the belief at the prior.  The feature is
rebuilt every step from body-only predicted measurement moments (the
tail never enters a moment integral) and the tail density evaluated at
the predicted state mean.

The robust update then *is* a plain Gaussian-filter update applied to
``z = feature(h(x, w))`` with pseudo measurement ``feature(y)``.  Any
moment-matching backend works; Monte Carlo is the reference because it
realizes the body/tail mixture indicator exactly per sample, while the
deterministic sigma-point backend blends the two branches by their
prior weights (an approximation, noted on ``rgf_update``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gf
from .distributions import GaussianDensity, standard_normal
from .linalg import check_psd, check_symmetric, solve_spd, symmetrize


class FeatureContext:
    """Per-step quantities defining the feature.

    Holds the predicted state mean, the body-only predicted measurement
    moments, the conditional tail density, and the tail weight.  The
    tail is always evaluated at the predicted mean ``mean_x``.
    """

    def __init__(self, mean_x, mean_y_body, cov_yy_body, tail, tail_weight):
        tail_weight = float(tail_weight)
        if not 0.0 <= tail_weight <= 1.0:
            raise ValueError("tail_weight must lie in [0, 1]")
        self.mean_x = np.atleast_1d(np.asarray(mean_x, dtype=float))
        self.mean_y_body = np.atleast_1d(np.asarray(mean_y_body, dtype=float))
        cov = np.atleast_2d(np.asarray(cov_yy_body, dtype=float))
        check_symmetric(cov, rtol=1e-10, name="body measurement covariance")
        check_psd(cov, floor_factor=1e-10, name="body measurement covariance")
        self.cov_yy_body = cov
        self.tail = tail
        self.tail_weight = tail_weight
        self._body = GaussianDensity(self.mean_y_body, self.cov_yy_body)

    @property
    def meas_dim(self) -> int:
        return self.mean_y_body.shape[0]

    def log_body(self, y):
        return self._body.logpdf(y)

    def log_tail(self, y):
        return self.tail.logpdf(y, self.mean_x)


@dataclass(frozen=True)
class FeatureVector:
    """Feature components; batched inputs yield batched components.

    Invariants hold exactly as computed: ``c0 + c2 == 1``,
    ``c1 == y * c0`` elementwise, and both responsibilities lie in [0, 1].
    """

    c0: np.ndarray  # (...,) body responsibility
    c1: np.ndarray  # (..., meas_dim) responsibility-weighted measurement
    c2: np.ndarray  # (...,) tail responsibility

    def to_array(self) -> np.ndarray:
        """Stack into shape (..., meas_dim + 2), ordered (c0, c1, c2)."""
        return np.concatenate(
            [self.c0[..., None], self.c1, self.c2[..., None]], axis=-1
        )


def feature(y, ctx: FeatureContext) -> FeatureVector:
    """Evaluate the robust feature at measurement(s) ``y``.

    Responsibilities are normalized in log space through a stable
    sigmoid: the smaller one is computed as ``1 / (1 + exp(|delta|))``
    and the larger as its exact complement, so the pair sums to one
    exactly and extreme measurements yield exactly (0, 0, 1) instead of
    NaN.  With zero tail weight the feature collapses to ``(1, y, 0)``
    and the plain Gaussian filter is recovered; weight one gives
    ``(0, 0, 1)``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1)
    lead = y.shape[:-1]
    w = ctx.tail_weight
    if w == 0.0:
        c0 = np.ones(lead)
        c2 = np.zeros(lead)
        return FeatureVector(c0, y * c0[..., None], c2)
    if w == 1.0:
        c0 = np.zeros(lead)
        return FeatureVector(c0, np.zeros_like(y), np.ones(lead))

    log_b = np.log1p(-w) + ctx.log_body(y)
    log_t = np.log(w) + ctx.log_tail(y)
    delta = np.asarray(log_b - log_t)
    with np.errstate(over="ignore"):
        minor = 1.0 / (1.0 + np.exp(np.abs(delta)))
    major = 1.0 - minor
    body_wins = delta >= 0.0
    c0 = np.where(body_wins, major, minor)
    c2 = np.where(body_wins, minor, major)
    return FeatureVector(c0, y * c0[..., None], c2)


def gaussian_conditioning(prior_mean, prior_cov, sensor):
    """Gain and offset of exact Gaussian conditioning on a linear body.

    For body ``N(y | A x + a, P)`` and prior ``N(prior_mean, prior_cov)``
    the conditional state mean is ``d + D y`` with

        D = (S^-1 + A^T P^-1 A)^-1 A^T P^-1
        d = (S^-1 + A^T P^-1 A)^-1 (S^-1 m - A^T P^-1 a)

    where ``S`` is the prior covariance and ``m`` its mean.
    """
    mean = np.atleast_1d(np.asarray(prior_mean, dtype=float))
    cov = np.atleast_2d(np.asarray(prior_cov, dtype=float))
    a_mat, offset, p_mat = sensor.A, sensor.a, sensor.P
    prec_prior = solve_spd(cov, np.eye(cov.shape[0]))
    pinv_a = solve_spd(p_mat, a_mat)
    prec_sum = prec_prior + a_mat.T @ pinv_a
    d_mat = solve_spd(prec_sum, pinv_a.T)
    d_vec = solve_spd(prec_sum, prec_prior @ mean - pinv_a.T @ offset)
    return d_mat, d_vec


def approx_posterior_mean(y, ctx: FeatureContext, D, d):
    """Responsibility-weighted blend of Gaussian conditioning and the prior mean.

    Returns ``c0 (d + D y) + c2 mean_x``.  Defined only for linear
    bodies (where ``D`` and ``d`` exist); this is a diagnostic for
    inspecting the redescending mean curve, not part of the update path.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1)
    phi = feature(y, ctx)
    lin = d + y @ np.asarray(D, dtype=float).T
    out = phi.c0[..., None] * lin + phi.c2[..., None] * ctx.mean_x
    return out if out.ndim > 1 else out.reshape(-1)


def predict_body_moments(belief, body_fn, body_noise, backend):
    """Predicted measurement mean and covariance under the body only.

    The tail never enters, which sidesteps its huge or infinite
    covariance; the cross-covariance from the propagation is discarded.
    """
    moments = gf.propagate_moments(belief, body_fn, body_noise, backend)
    return moments.mean, moments.cov


def pseudo_measurement_moments(belief, sensor, ctx: FeatureContext, backend) -> gf.MomentTriple:
    """Moments of ``z = feature(h(x, w))`` with ``w`` from the full mixture.

    The body and tail branches of the sensor are propagated jointly as
    one stacked function, and the branch moments are then combined with
    the exact mixture algebra (the indicator is integrated out in closed
    form rather than sampled):

        mu_z   = (1-w) mu_b + w mu_t
        cov_xz = (1-w) cov_xb + w cov_xt
        cov_zz = (1-w) cov_bb + w cov_tt
                 + w (1-w) (mu_b - mu_t)(mu_b - mu_t)^T

    by the law of total covariance over the branch indicator.  This
    keeps every feature component informed by all samples or sigma
    points even when the tail weight is tiny; realizing the indicator
    per sample instead leaves the tail-responsibility direction of the
    covariance resting on ~``w * N`` draws, and the resulting gain noise
    destabilizes the filter for small ``w``.
    """
    w = sensor.tail_weight
    nb = sensor.body_noise.noise_dim
    zdim = sensor.meas_dim + 2

    def stacked(x, u):
        y_body = sensor.body_fn(x, sensor.body_noise.from_standard_normal(u[..., :nb]))
        y_tail = sensor.tail.from_standard_normal(x, u[..., nb:])
        return np.concatenate(
            [feature(y_body, ctx).to_array(), feature(y_tail, ctx).to_array()], axis=-1
        )

    noise = standard_normal(nb + sensor.tail.noise_dim)
    mm = gf.propagate_moments(belief, stacked, noise, backend)
    mean_b, mean_t = mm.mean[:zdim], mm.mean[zdim:]
    gap = mean_b - mean_t
    mean_z = (1.0 - w) * mean_b + w * mean_t
    cov_zz = (
        (1.0 - w) * mm.cov[:zdim, :zdim]
        + w * mm.cov[zdim:, zdim:]
        + w * (1.0 - w) * np.outer(gap, gap)
    )
    cross_xz = (1.0 - w) * mm.cross[:, :zdim] + w * mm.cross[:, zdim:]
    return gf.MomentTriple(mean_z, symmetrize(cov_zz), cross_xz)


def rgf_update(belief, sensor, y, backend) -> gf.GaussianBelief:
    """Robust measurement update: a GF update on the feature of the measurement.

    Builds the feature from body-only predicted moments, computes the
    pseudo-sensor moments of ``feature(h(x, w))`` under the full
    body+tail mixture (see :func:`pseudo_measurement_moments`), and runs
    the plain GF conditioning against the pseudo measurement
    ``feature(y)``.

    The feature covariance is rank-deficient wherever components
    saturate; the shared jitter ladder regularizes its inversion, no
    dimensions are dropped.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y)):
        raise ValueError("measurement must be finite")
    mean_yb, cov_yb = predict_body_moments(belief, sensor.body_fn, sensor.body_noise, backend)
    ctx = FeatureContext(belief.mean, mean_yb, cov_yb, sensor.tail, sensor.tail_weight)
    z_obs = feature(y, ctx).to_array()
    moments = pseudo_measurement_moments(belief, sensor, ctx, backend)
    return gf.update_from_moments(belief, moments, z_obs)


def rgf_step(belief, transition, sensor, y, backend) -> gf.GaussianBelief:
    """One full robust filter step: predict, then robust update."""
    predicted = gf.predict(belief, transition, backend)
    return rgf_update(predicted, sensor, y, backend)
