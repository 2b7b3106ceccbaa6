"""State-space models, tailed sensors, simulators, and the benchmark scenarios.

A sensor prone to outliers is split into a Gaussian *body* describing
nominal measurements and a slowly-decaying *tail* carrying outlier mass
``tail_weight``.  The combined model is the mixture
``p(y|x) = (1 - w) body(y|x) + w tail(y|x)``.

Two concrete scenarios live here: a scalar random-walk with Cauchy
measurement contamination, and radar tracking of a reentry vehicle
(range/bearing from a ground station, glint noise as a two-Gaussian
mixture).  Both are used by :mod:`rgf.benchmarks`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .distributions import CauchyDensity, GaussianDensity, standard_normal
from .gf import GaussianBelief
from .linalg import check_psd, check_symmetric


class SimulationError(RuntimeError):
    """Raised when a simulated state stops being finite."""


@dataclass(frozen=True)
class TransitionModel:
    """Functional transition ``x_t = g(x_{t-1}, v_t)`` with Gaussian ``v_t``.

    ``g`` must be vectorized over leading axes; ``noise`` is usually a
    standard normal that ``g`` maps onto the desired process noise.
    """

    state_dim: int
    noise_dim: int
    g: Callable
    noise: GaussianDensity


class LinearGaussianSensor:
    """Affine Gaussian measurement model ``y = A x + a + w``, ``w ~ N(0, P)``."""

    def __init__(self, A, a, P):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        P = np.atleast_2d(np.asarray(P, dtype=float))
        check_symmetric(P, rtol=1e-10, name="sensor noise covariance")
        check_psd(P, floor_factor=1e-10, name="sensor noise covariance")
        self.P = P
        if self.A.shape[0] != self.a.shape[0] or self.P.shape[0] != self.a.shape[0]:
            raise ValueError("inconsistent sensor dimensions")

    @property
    def meas_dim(self) -> int:
        return self.a.shape[0]

    def fn(self, x, w):
        return x @ self.A.T + self.a + w

    @property
    def noise(self) -> GaussianDensity:
        return GaussianDensity(np.zeros(self.meas_dim), self.P)


class ShiftedTail:
    """Conditional tail density: a fixed base density recentered at ``center_fn(x)``.

    ``logpdf(y, x)`` evaluates ``base`` at ``y - center_fn(x)``, so the
    base should be located at zero (or carry the intended offset).
    """

    def __init__(self, center_fn, base):
        self.center_fn = center_fn
        self.base = base

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def noise_dim(self) -> int:
        return self.base.noise_dim

    def logpdf(self, y, x):
        y = np.asarray(y, dtype=float)
        return self.base.logpdf(y - np.asarray(self.center_fn(x), dtype=float))

    def from_standard_normal(self, x, u):
        return np.asarray(self.center_fn(x), dtype=float) + self.base.from_standard_normal(u)

    def sample(self, x, rng):
        return self.from_standard_normal(x, rng.standard_normal(self.noise_dim))


class TailedSensorModel:
    """Gaussian body plus fat tail, with tail mass ``tail_weight``.

    ``body_fn(x, w)`` consumes body noise ``w ~ body_noise``; the tail is
    a conditional density evaluable at ``(y, x)``.  The full sampler
    returns a body draw with probability ``1 - tail_weight`` and a tail
    draw otherwise.  ``measurement_from_normal`` expresses one full draw
    as a deterministic map of ``1 + body + tail`` standard normals
    (indicator variate first), so integration backends that sample can
    realize the mixture exactly.
    """

    def __init__(self, meas_dim, body_fn, body_noise, tail, tail_weight):
        tail_weight = float(tail_weight)
        if not 0.0 <= tail_weight <= 1.0:
            raise ValueError("tail_weight must lie in [0, 1]")
        if tail.dim != meas_dim or body_noise.dim != meas_dim:
            raise ValueError("body noise and tail must live in measurement space")
        self.meas_dim = int(meas_dim)
        self.body_fn = body_fn
        self.body_noise = body_noise
        self.tail = tail
        self.tail_weight = tail_weight

    @property
    def noise_dim_full(self) -> int:
        return 1 + self.body_noise.noise_dim + self.tail.noise_dim

    def measurement_from_normal(self, x, u):
        """Full mixture draw from standard normals ``u`` of shape (..., noise_dim_full)."""
        u = np.asarray(u, dtype=float)
        nb = self.body_noise.noise_dim
        take_tail = u[..., 0] < ndtri(self.tail_weight)
        y_body = np.asarray(
            self.body_fn(x, self.body_noise.from_standard_normal(u[..., 1 : 1 + nb])),
            dtype=float,
        )
        y_tail = self.tail.from_standard_normal(x, u[..., 1 + nb :])
        return np.where(take_tail[..., None], y_tail, y_body)

    def sample_measurement(self, x, rng):
        """One draw; returns ``(y, from_tail)``."""
        u = rng.standard_normal(self.noise_dim_full)
        from_tail = bool(u[0] < ndtri(self.tail_weight))
        y = self.measurement_from_normal(x, u)
        return y, from_tail


@dataclass
class FilterTrack:
    """Per-step estimates of one filter over a simulated trajectory."""

    means: np.ndarray  # (steps, state_dim)
    covs: np.ndarray  # (steps, state_dim, state_dim)
    diverged_at: int | None = None  # 1-based step where the run was truncated

    @property
    def valid_steps(self) -> int:
        return self.means.shape[0] if self.diverged_at is None else self.diverged_at - 1


@dataclass
class TrajectoryLog:
    """Ground truth, measurements, and filter estimates for one run.

    All per-step arrays cover t = 1..steps; measurement rows are NaN on
    predict-only steps and ``meas_mask`` marks where a measurement was
    taken.  ``tail_mask`` marks measurements drawn from the tail.
    """

    initial_state: np.ndarray
    states: np.ndarray  # (steps, state_dim)
    meas_mask: np.ndarray  # (steps,) bool
    measurements: np.ndarray  # (steps, meas_dim), NaN where meas_mask is False
    tail_mask: np.ndarray  # (steps,) bool
    estimates: dict[str, FilterTrack] = field(default_factory=dict)

    def __post_init__(self):
        n = self.states.shape[0]
        if not (
            self.meas_mask.shape[0] == n
            and self.measurements.shape[0] == n
            and self.tail_mask.shape[0] == n
        ):
            raise ValueError("per-step sequences must share length")

    @property
    def steps(self) -> int:
        return self.states.shape[0]


def simulate_trajectory(
    transition, sensor, x0_density, steps, meas_every, rng, x0=None
) -> TrajectoryLog:
    """Roll the system forward and record states plus sampled measurements.

    The initial state is drawn from ``x0_density`` unless ``x0`` pins it.
    A measurement is emitted every ``meas_every`` steps.
    """
    if steps < 1 or meas_every < 1:
        raise ValueError("steps and meas_every must be >= 1")
    x = np.asarray(x0, dtype=float) if x0 is not None else x0_density.sample(rng)
    x0_drawn = x.copy()
    states = np.empty((steps, transition.state_dim))
    meas_mask = np.zeros(steps, dtype=bool)
    measurements = np.full((steps, sensor.meas_dim), np.nan)
    tail_mask = np.zeros(steps, dtype=bool)
    for t in range(1, steps + 1):
        v = transition.noise.sample(rng)
        x = np.asarray(transition.g(x, v), dtype=float)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at step {t}")
        states[t - 1] = x
        if t % meas_every == 0:
            y, from_tail = sensor.sample_measurement(x, rng)
            meas_mask[t - 1] = True
            measurements[t - 1] = y
            tail_mask[t - 1] = from_tail
    return TrajectoryLog(x0_drawn, states, meas_mask, measurements, tail_mask)


# ---------------------------------------------------------------------------
# Scenario 1: scalar random walk with Cauchy-contaminated measurements
# ---------------------------------------------------------------------------


def linear_example_transition() -> TransitionModel:
    """Random walk ``x_t = x_{t-1} + v_t`` with unit process noise."""
    return TransitionModel(1, 1, lambda x, v: x + v, standard_normal(1))


def linear_example_prior() -> GaussianDensity:
    return GaussianDensity([0.0], [[1.0]])


def linear_example_sensor(tail_weight=0.1, tail_scale=10.0) -> TailedSensorModel:
    """Identity body with unit Gaussian noise plus a Cauchy tail centered on the state."""
    return TailedSensorModel(
        meas_dim=1,
        body_fn=lambda x, w: x + w,
        body_noise=standard_normal(1),
        tail=ShiftedTail(lambda x: x, CauchyDensity([0.0], [tail_scale])),
        tail_weight=tail_weight,
    )


def linear_example_fat_surrogate(tail_weight=0.1, surrogate_std=10.0) -> GaussianDensity:
    """Finite-variance stand-in for the Cauchy tail in a plain Gaussian filter.

    The Cauchy tail has no variance, so a literal moment-matched GF is
    undefined; the fat filter instead models the contamination as a
    wide Gaussian, giving the two-component surrogate
    ``(1-w) N(0,1) + w N(0, surrogate_std^2)`` (10.9 total variance at
    the defaults).  Both components are zero mean and the noise is
    additive, so a plain GF update sees the surrogate only through that
    total variance; returning the matched Gaussian reproduces the
    surrogate-mixture GF exactly while keeping deterministic backends
    usable.
    """
    var = (1.0 - tail_weight) * 1.0 + tail_weight * surrogate_std**2
    return GaussianDensity([0.0], [[var]])


# ---------------------------------------------------------------------------
# Scenario 2: radar tracking of a reentry vehicle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadarConstants:
    """Physical and noise constants of the reentry tracking scenario.

    Ranges are in km, bearing in mrad, time in seconds.  ``radar_x`` and
    ``radar_y`` locate the ground station; they default to (R0, 0), a
    point on the Earth's surface under the reentry corridor.  That
    placement and the initial filter covariance are library defaults,
    not part of the published scenario definition.
    """

    delta_s: float = 0.05
    sigma_v: float = 5e-3
    beta0: float = 0.59
    H0: float = 13.4
    Gm0: float = 3.986e5
    R0: float = 6374.0
    sigma_nom_r: float = 0.5
    sigma_con_r: float = 15.8
    sigma_nom_theta_mrad: float = 0.63
    sigma_con_theta_mrad: float = 200.0
    alpha: float = 0.15
    radar_x: float | None = None
    radar_y: float = 0.0

    @property
    def radar_position(self) -> np.ndarray:
        x = self.R0 if self.radar_x is None else self.radar_x
        return np.array([x, self.radar_y])

    @property
    def cov_nominal(self) -> np.ndarray:
        return np.diag([self.sigma_nom_r**2, self.sigma_nom_theta_mrad**2])

    @property
    def cov_contaminated(self) -> np.ndarray:
        return np.diag([self.sigma_con_r**2, self.sigma_con_theta_mrad**2])


def radar_constants_from_json(path) -> RadarConstants:
    """Load scenario constants from a JSON file keyed by the field names above."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f.name for f in fields(RadarConstants)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown radar config keys: {sorted(unknown)}")
    return RadarConstants(**{k: float(v) for k, v in raw.items()})


def radar_transition(x, v, constants: RadarConstants):
    """One discretized step of the reentry dynamics.

    Positions integrate velocities; velocities pick up drag and gravity
    plus scaled process noise; the log ballistic coefficient ``x[4]`` is
    constant.  Batched over leading axes of ``x`` (..., 5) and ``v`` (..., 2).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    c = constants
    p1, p2, v1, v2, b = (x[..., i] for i in range(5))
    radius = np.hypot(p1, p2)
    if np.any(radius == 0.0):
        raise ValueError("distance to Earth's center is zero; gravity term undefined")
    speed = np.hypot(v1, v2)
    drag = -c.beta0 * np.exp(b) * np.exp((c.R0 - radius) / c.H0) * speed
    grav = -c.Gm0 / radius**3
    kick = np.sqrt(c.delta_s) * c.sigma_v
    return np.stack(
        [
            p1 + c.delta_s * v1,
            p2 + c.delta_s * v2,
            v1 + c.delta_s * (drag * v1 + grav * p1) + kick * v[..., 0],
            v2 + c.delta_s * (drag * v2 + grav * p2) + kick * v[..., 1],
            b,
        ],
        axis=-1,
    )


def radar_measurement(x, radar_pos, w):
    """Range (km) and bearing (mrad) from the station, plus additive noise ``w``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    dx = x[..., 0] - radar_pos[0]
    dy = x[..., 1] - radar_pos[1]
    if np.any((dx == 0.0) & (dy == 0.0)):
        raise ValueError("target position coincides with the radar station")
    with np.errstate(divide="ignore"):
        bearing = 1e3 * np.arctan(dy / dx)
    rng_km = np.hypot(dx, dy)
    return np.stack([rng_km + w[..., 0], bearing + w[..., 1]], axis=-1)


RADAR_INITIAL_STATE = np.array([6500.4, 349.14, -1.8093, -6.7967, 0.6932])
RADAR_INITIAL_MEAN = np.array([6500.4, 349.14, -1.8093, -6.7967, 0.0])
# Near-perfect initial kinematic knowledge, full uncertainty on the
# mismatched ballistic parameter.  A library default, see RadarConstants.
RADAR_INITIAL_COV = np.diag([1e-6, 1e-6, 1e-6, 1e-6, 1.0])


def radar_transition_model(constants: RadarConstants) -> TransitionModel:
    return TransitionModel(
        5, 2, lambda x, v: radar_transition(x, v, constants), standard_normal(2)
    )


def radar_noiseless_measurement(constants: RadarConstants):
    """The deterministic range/bearing map used as body and tail center."""
    pos = constants.radar_position

    def h0(x):
        return radar_measurement(x, pos, np.zeros(2))

    return h0


def radar_true_sensor(constants: RadarConstants) -> TailedSensorModel:
    """Simulation-side sensor: glint noise as a two-Gaussian mixture."""
    pos = constants.radar_position
    h0 = radar_noiseless_measurement(constants)
    return TailedSensorModel(
        meas_dim=2,
        body_fn=lambda x, w: radar_measurement(x, pos, w),
        body_noise=GaussianDensity(np.zeros(2), constants.cov_nominal),
        tail=ShiftedTail(h0, GaussianDensity(np.zeros(2), constants.cov_contaminated)),
        tail_weight=constants.alpha,
    )


def radar_rgf_sensor(constants: RadarConstants, tail_weight=0.1) -> TailedSensorModel:
    """Filter-side sensor: nominal Gaussian body plus a default Cauchy tail.

    The tail scale is ten nominal standard deviations per channel; only
    the nominal noise is assumed known, the outlier shape is generic.
    """
    pos = constants.radar_position
    h0 = radar_noiseless_measurement(constants)
    scales = np.array([10.0 * constants.sigma_nom_r, 10.0 * constants.sigma_nom_theta_mrad])
    return TailedSensorModel(
        meas_dim=2,
        body_fn=lambda x, w: radar_measurement(x, pos, w),
        body_noise=GaussianDensity(np.zeros(2), constants.cov_nominal),
        tail=ShiftedTail(h0, CauchyDensity(np.zeros(2), scales)),
        tail_weight=tail_weight,
    )


def radar_thin_noise(constants: RadarConstants) -> GaussianDensity:
    return GaussianDensity(np.zeros(2), constants.cov_nominal)


def radar_fat_noise(constants: RadarConstants) -> GaussianDensity:
    cov = (1.0 - constants.alpha) * constants.cov_nominal + constants.alpha * constants.cov_contaminated
    return GaussianDensity(np.zeros(2), cov)


def radar_initial_belief() -> GaussianBelief:
    return GaussianBelief(RADAR_INITIAL_MEAN, RADAR_INITIAL_COV)
