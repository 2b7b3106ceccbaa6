"""Dense linear-algebra helpers shared by the filter and density code.

Everything here operates on plain float ndarrays.  The central piece is
the guarded Cholesky factorization: covariance matrices produced by
moment matching are symmetric and positive semidefinite only up to
round-off (and sometimes exactly singular, e.g. when a propagated
function has constant components), so factorizations retry with an
escalating diagonal jitter before giving up.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

# Escalating jitter ladder, each entry scaled by trace/dim of the matrix
# being factorized.  Consumed at call time so it can be swapped out to
# exercise failure paths.
JITTER_SCALES = (1e-12, 1e-9, 1e-6)


class NumericalError(RuntimeError):
    """A covariance could not be factorized even after jitter."""


def symmetrize(mat):
    """Return the symmetric part (M + M^T) / 2."""
    return 0.5 * (mat + mat.T)


def check_symmetric(mat, rtol, name="matrix"):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    scale = max(np.max(np.abs(mat)), 1.0)
    if np.max(np.abs(mat - mat.T)) > rtol * scale:
        raise ValueError(f"{name} is not symmetric within relative tolerance {rtol}")
    return mat


def check_psd(mat, floor_factor, name="matrix"):
    """Raise if any eigenvalue falls below -floor_factor * trace."""
    eigmin = float(np.linalg.eigvalsh(mat).min())
    floor = -floor_factor * max(float(np.trace(mat)), 0.0)
    if eigmin < floor:
        raise ValueError(
            f"{name} is not positive semidefinite: min eigenvalue {eigmin:.3e} "
            f"below floor {floor:.3e}"
        )
    return mat


def chol_spd(mat, jitter_scales=None):
    """Lower Cholesky factor of a nominally-PSD matrix.

    Tries the matrix as given, then retries with jitter
    ``scale * trace/dim`` added to the diagonal for each entry of the
    ladder.  Raises :class:`NumericalError` when every attempt fails.
    """
    mat = np.asarray(mat, dtype=float)
    if jitter_scales is None:
        jitter_scales = JITTER_SCALES
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    dim = mat.shape[0]
    base = float(np.trace(mat)) / dim
    if base > 0.0:
        eye = np.eye(dim)
        for scale in jitter_scales:
            try:
                return np.linalg.cholesky(mat + scale * base * eye)
            except np.linalg.LinAlgError:
                continue
    raise NumericalError(
        f"matrix of dim {dim} not factorizable after jitter ladder {tuple(jitter_scales)}"
    )


def solve_spd(mat, rhs):
    """Solve ``mat @ x = rhs`` for symmetric PSD ``mat`` with the jitter policy."""
    return cho_solve((chol_spd(mat), True), rhs)


def sample_mvn(mean, cov, rng, size):
    """Draw ``size`` samples from N(mean, cov) via the guarded Cholesky factor.

    Returns shape ``(size, d)``.  The draw consumes exactly ``size * d``
    standard normals, which keeps streams reproducible across backends.
    """
    mean = np.asarray(mean, dtype=float)
    chol = chol_spd(cov)
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ chol.T


def mahalanobis_sq(diff, chol):
    """Squared Mahalanobis norms ``diff^T (L L^T)^{-1} diff`` for batched diff.

    ``diff`` has shape ``(..., d)``; ``chol`` is the lower factor of the
    covariance.  Returns shape ``(...,)``.
    """
    diff = np.asarray(diff, dtype=float)
    lead = diff.shape[:-1]
    flat = diff.reshape(-1, diff.shape[-1])
    y = solve_triangular(chol, flat.T, lower=True)
    return (y * y).sum(axis=0).reshape(lead)
