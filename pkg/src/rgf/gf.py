"""Gaussian filter core: beliefs, moment-matching backends, predict and update.

A filter step needs the first two moments of a propagated variable
``y = fn(x, w)`` with ``x`` drawn from the current belief and ``w`` from
a Gaussian noise density.  Three interchangeable backends compute the
triple ``(mu_y, cov_yy, cov_xy)``:

* ``ExactLinearBackend`` - closed form, valid only for affine ``fn``;
* ``UnscentedBackend`` - sigma points on the augmented ``(x, w)`` vector;
* ``MonteCarloBackend`` - joint sampling with unbiased (N-1) estimates.

Propagated functions must be vectorized: they map arrays of shape
``(..., state_dim)`` and ``(..., noise_dim)`` to ``(..., out_dim)``.
Noise is always an explicit augmented variable; nothing assumes it
enters additively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag, cho_solve

from .distributions import GaussianDensity
from .linalg import (
    JITTER_SCALES,
    NumericalError,
    check_psd,
    check_symmetric,
    chol_spd,
    sample_mvn,
    symmetrize,
)


class GaussianBelief:
    """Gaussian state belief with validated symmetric PSD covariance."""

    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError(f"covariance shape {cov.shape} does not match dim {mean.shape[0]}")
        check_symmetric(cov, rtol=1e-10, name="belief covariance")
        check_psd(cov, floor_factor=1e-10, name="belief covariance")
        self.mean = mean
        self.cov = cov

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng, size):
        return sample_mvn(self.mean, self.cov, rng, size)

    def __repr__(self):  # pragma: no cover
        return f"GaussianBelief(mean={self.mean!r}, cov=...)"


@dataclass(frozen=True)
class MomentTriple:
    """Moments of a propagated variable: mean, covariance, state cross-covariance."""

    mean: np.ndarray
    cov: np.ndarray
    cross: np.ndarray  # (state_dim, out_dim)


class ExactLinearBackend:
    """Closed-form moments for affine functions ``fn(x, w) = c + A x + B w``.

    The affine map is recovered by probing ``fn`` with basis vectors and
    verified at two extra points; a mismatch means the backend was
    selected for a nonlinear function, which raises ``ValueError``.
    """

    def propagate(self, belief, fn, noise):
        dx, dw = belief.dim, noise.dim
        zero_w = np.zeros((dx, dw))
        offset = np.asarray(fn(np.zeros(dx), np.zeros(dw)), dtype=float)
        a_mat = (np.asarray(fn(np.eye(dx), zero_w), dtype=float) - offset).T
        b_mat = (np.asarray(fn(np.zeros((dw, dx)), np.eye(dw)), dtype=float) - offset).T

        for shift in (1.0, -2.0):
            xp = belief.mean + shift
            wp = noise.mean + shift
            got = np.asarray(fn(xp, wp), dtype=float)
            want = offset + a_mat @ xp + b_mat @ wp
            scale = 1.0 + np.max(np.abs(want))
            if np.max(np.abs(got - want)) > 1e-8 * scale:
                raise ValueError("exact-linear backend requires an affine function")

        mean = offset + a_mat @ belief.mean + b_mat @ noise.mean
        cov = a_mat @ belief.cov @ a_mat.T + b_mat @ noise.cov @ b_mat.T
        cross = belief.cov @ a_mat.T
        return MomentTriple(mean, symmetrize(cov), cross)


class UnscentedBackend:
    """Sigma-point moments on the augmented ``(x, w)`` vector.

    Scaled sigma points with alpha=1, beta=2 and kappa = 3 - n_aug by
    default, which places the off-center points at sqrt(3) standard
    deviations regardless of dimension.
    """

    def __init__(self, alpha=1.0, beta=2.0, kappa=None):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.kappa = kappa

    def propagate(self, belief, fn, noise):
        dx, dw = belief.dim, noise.dim
        n = dx + dw
        kappa = (3.0 - n) if self.kappa is None else float(self.kappa)
        lam = self.alpha**2 * (n + kappa) - n
        scale = n + lam
        if scale <= 0.0:
            raise ValueError("unscented scaling n + lambda must be positive")

        mean_aug = np.concatenate([belief.mean, noise.mean])
        cov_aug = block_diag(belief.cov, noise.cov)
        chol = chol_spd(scale * cov_aug)
        pts = np.vstack([mean_aug, mean_aug + chol.T, mean_aug - chol.T])

        wm = np.full(2 * n + 1, 0.5 / scale)
        wm[0] = lam / scale
        wc = wm.copy()
        wc[0] += 1.0 - self.alpha**2 + self.beta

        xs, ws = pts[:, :dx], pts[:, dx:]
        ys = np.asarray(fn(xs, ws), dtype=float)
        mean = wm @ ys
        dev_y = ys - mean
        dev_x = xs - belief.mean
        cov = (wc[:, None] * dev_y).T @ dev_y
        cross = (wc[:, None] * dev_x).T @ dev_y
        return MomentTriple(mean, symmetrize(cov), cross)


class MonteCarloBackend:
    """Joint-sampling moments with unbiased covariance estimates.

    Holds its own generator, seeded at construction: a fixed seed and a
    fixed call sequence reproduce results bit for bit.  The sample count
    must satisfy ``num_samples >= 2 * (state_dim + noise_dim)``.
    """

    def __init__(self, num_samples=1000, seed=0):
        self.num_samples = int(num_samples)
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def propagate(self, belief, fn, noise):
        n = self.num_samples
        if n < 2 * (belief.dim + noise.dim):
            raise ValueError(
                f"num_samples={n} below minimum {2 * (belief.dim + noise.dim)}"
            )
        xs = belief.sample(self.rng, n)
        ws = noise.sample(self.rng, n)
        ys = np.asarray(fn(xs, ws), dtype=float)
        mean = ys.mean(axis=0)
        dev_y = ys - mean
        dev_x = xs - xs.mean(axis=0)
        cov = dev_y.T @ dev_y / (n - 1)
        cross = dev_x.T @ dev_y / (n - 1)
        return MomentTriple(mean, symmetrize(cov), cross)


def propagate_moments(belief, fn, noise, backend) -> MomentTriple:
    """Moments of ``fn(x, w)`` under ``x ~ belief``, ``w ~ noise``."""
    return backend.propagate(belief, fn, noise)


def _belief_from_moments(mean, cov) -> GaussianBelief:
    cov = symmetrize(cov)
    try:
        return GaussianBelief(mean, cov)
    except ValueError:
        dim = cov.shape[0]
        base = float(np.trace(cov)) / dim
        for scale in JITTER_SCALES:
            try:
                return GaussianBelief(mean, cov + scale * base * np.eye(dim))
            except ValueError:
                continue
    raise NumericalError("propagated covariance not PSD after symmetrization and jitter")


def predict(belief, transition, backend) -> GaussianBelief:
    """Propagate the belief through the transition model."""
    if transition.state_dim != belief.dim:
        raise ValueError(
            f"belief dim {belief.dim} does not match transition state dim {transition.state_dim}"
        )
    moments = propagate_moments(belief, transition.g, transition.noise, backend)
    return _belief_from_moments(moments.mean, moments.cov)


def update_from_moments(belief, moments: MomentTriple, y) -> GaussianBelief:
    """Condition the belief on ``y`` given precomputed measurement moments.

    Posterior mean is ``mu_x + cov_xy cov_yy^-1 (y - mu_y)`` and posterior
    covariance ``cov_xx - cov_xy cov_yy^-1 cov_xy^T``; the inversion uses
    the guarded Cholesky with the escalating jitter ladder.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y)):
        raise ValueError("measurement must be finite")
    if y.shape != moments.mean.shape:
        raise ValueError(
            f"measurement dim {y.shape} does not match propagated dim {moments.mean.shape}"
        )
    chol = chol_spd(moments.cov)
    gain = cho_solve((chol, True), moments.cross.T).T
    mean = belief.mean + gain @ (y - moments.mean)
    cov = belief.cov - gain @ moments.cross.T
    return _belief_from_moments(mean, cov)


def update(belief, sensor_fn, sensor_noise, y, backend) -> GaussianBelief:
    """Condition the belief on measurement ``y`` under the given sensor."""
    moments = propagate_moments(belief, sensor_fn, sensor_noise, backend)
    return update_from_moments(belief, moments, y)
