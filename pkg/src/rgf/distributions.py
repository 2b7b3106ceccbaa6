"""Probability densities and samplers for bodies, tails, and simulators.

Three families are provided: multivariate Gaussians, per-dimension
independent Cauchy densities (a diagonal scale matrix is read as one
scale per dimension), and two-component mixtures.  All log densities
are evaluated in log space; nothing is exponentiated until a caller
forms a normalized ratio.

Samplers are driven by an explicit ``numpy.random.Generator`` and are
also exposed through ``from_standard_normal``, which maps a block of
standard-normal variates onto a draw.  That map is what lets non-Gaussian
noise enter filter functions as a deterministic transform of Gaussian
inputs, so every integration backend sees the same interface.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

from .linalg import NumericalError, check_psd, check_symmetric

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_batch(x, dim, name="x"):
    """Coerce input to shape (..., dim); scalars are allowed when dim == 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dim:
        raise ValueError(f"{name} has trailing dimension {x.shape[-1]}, expected {dim}")
    return x


class GaussianDensity:
    """Multivariate Gaussian N(mean, cov).

    The covariance must be symmetric (1e-12 relative) and positive
    semidefinite (eigenvalue floor -1e-10 * trace).  Evaluation adds a
    one-shot diagonal jitter ``1e-9 * max(1, trace/dim)`` when the plain
    Cholesky factorization fails, which covers covariances that are
    singular by construction.
    """

    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError(f"covariance shape {cov.shape} does not match dim {mean.shape[0]}")
        check_symmetric(cov, rtol=1e-12, name="covariance")
        check_psd(cov, floor_factor=1e-10, name="covariance")
        self.mean = mean
        self.cov = cov
        self._chol = None

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.mean.shape[0]

    def _factor(self):
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.cov)
            except np.linalg.LinAlgError:
                eps = 1e-9 * max(1.0, float(np.trace(self.cov)) / self.dim)
                try:
                    self._chol = np.linalg.cholesky(self.cov + eps * np.eye(self.dim))
                except np.linalg.LinAlgError:
                    raise NumericalError("covariance not decomposable even after jitter") from None
        return self._chol

    def logpdf(self, x):
        """Log density at ``x`` (shape ``(..., dim)``); finite for finite x."""
        x = _as_batch(x, self.dim)
        chol = self._factor()
        from .linalg import mahalanobis_sq

        quad = mahalanobis_sq(x - self.mean, chol)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        out = -0.5 * (self.dim * _LOG_2PI + log_det + quad)
        return float(out) if out.ndim == 0 else out

    def from_standard_normal(self, u):
        u = _as_batch(u, self.noise_dim, name="u")
        return self.mean + u @ self._factor().T

    def sample(self, rng, size=None):
        shape = (self.noise_dim,) if size is None else (size, self.noise_dim)
        return self.from_standard_normal(rng.standard_normal(shape))


def standard_normal(dim: int) -> GaussianDensity:
    """Unit-covariance, zero-mean Gaussian of the given dimension."""
    return GaussianDensity(np.zeros(dim), np.eye(dim))


class CauchyDensity:
    """Product of independent one-dimensional Cauchy densities.

    ``scale`` holds one positive half-width per dimension; a diagonal
    scale-matrix specification maps onto this by taking the square roots
    of its diagonal.
    """

    def __init__(self, location, scale):
        location = np.atleast_1d(np.asarray(location, dtype=float))
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        if location.shape != scale.shape or location.ndim != 1:
            raise ValueError("location and scale must be vectors of equal length")
        if np.any(scale <= 0.0):
            raise ValueError("every scale entry must be > 0")
        self.location = location
        self.scale = scale

    @property
    def dim(self) -> int:
        return self.location.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.location.shape[0]

    def logpdf(self, x):
        x = _as_batch(x, self.dim)
        z = (x - self.location) / self.scale
        out = np.sum(-np.log(np.pi * self.scale) - np.log1p(z * z), axis=-1)
        return float(out) if out.ndim == 0 else out

    def from_standard_normal(self, u):
        """Map standard normals to Cauchy draws through the quantile function."""
        u = _as_batch(u, self.noise_dim, name="u")
        return self.location + self.scale * np.tan(np.pi * (ndtr(u) - 0.5))

    def sample(self, rng, size=None):
        shape = (self.noise_dim,) if size is None else (size, self.noise_dim)
        return self.from_standard_normal(rng.standard_normal(shape))


class MixtureNoise:
    """Two-component mixture: (1 - weight) * component_a + weight * component_b.

    ``weight`` is the mass of the second component.  Sampling draws a
    Bernoulli(weight) indicator and then the selected component; through
    ``from_standard_normal`` the indicator consumes the first normal
    variate and the components consume fixed trailing blocks, so one
    draw always uses ``1 + a.noise_dim + b.noise_dim`` variates.
    """

    def __init__(self, weight, component_a, component_b):
        weight = float(weight)
        if not 0.0 <= weight <= 1.0:
            raise ValueError("weight must lie in [0, 1]")
        if component_a.dim != component_b.dim:
            raise ValueError("mixture components must share the event dimension")
        self.weight = weight
        self.component_a = component_a
        self.component_b = component_b

    @property
    def dim(self) -> int:
        return self.component_a.dim

    @property
    def noise_dim(self) -> int:
        return 1 + self.component_a.noise_dim + self.component_b.noise_dim

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            la = np.log1p(-self.weight) if self.weight < 1.0 else -np.inf
            lb = np.log(self.weight)
        out = np.logaddexp(la + self.component_a.logpdf(x), lb + self.component_b.logpdf(x))
        return float(out) if np.ndim(out) == 0 else out

    def from_standard_normal(self, u):
        u = _as_batch(u, self.noise_dim, name="u")
        na = self.component_a.noise_dim
        take_b = u[..., 0] < ndtri(self.weight)
        draw_a = self.component_a.from_standard_normal(u[..., 1 : 1 + na])
        draw_b = self.component_b.from_standard_normal(u[..., 1 + na :])
        return np.where(take_b[..., None], draw_b, draw_a)

    def indicator_from_standard_normal(self, u):
        """Boolean array: True where a draw comes from component_b."""
        u = _as_batch(u, self.noise_dim, name="u")
        return u[..., 0] < ndtri(self.weight)

    def sample(self, rng, size=None):
        shape = (self.noise_dim,) if size is None else (size, self.noise_dim)
        return self.from_standard_normal(rng.standard_normal(shape))


def gaussian_logpdf(x, density: GaussianDensity):
    """Log of N(x | mean, cov) for a :class:`GaussianDensity`."""
    return density.logpdf(x)


def cauchy_logpdf(x, density: CauchyDensity):
    """Log density of the independent-per-dimension Cauchy."""
    return density.logpdf(x)


def sample(density, rng, size=None):
    """Draw from any density exposing the sampler protocol."""
    return density.sample(rng, size=size)
