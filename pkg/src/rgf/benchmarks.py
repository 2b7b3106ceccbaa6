"""Benchmark harness: linear tracking, tail-parameter sweep, radar reentry.

Each scenario simulates ground truth once per seed and runs every filter
on the identical measurement sequence, so comparisons are paired.  Three
filters are compared:

* ``gf-thin`` - plain GF that only models the nominal Gaussian noise;
* ``gf-fat``  - plain GF fed the full mixture's (large) covariance;
* ``rgf``     - the robust filter, body + tail through the feature update.

Per-seed work is independent; seeds can fan out to worker threads
(capped by the ``RGF_THREADS`` environment variable) and results are
assembled in seed order, so parallelism never changes any output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import gf
from .distributions import GaussianDensity, standard_normal
from .linalg import NumericalError
from .models import (
    RADAR_INITIAL_STATE,
    FilterTrack,
    RadarConstants,
    SimulationError,
    TrajectoryLog,
    linear_example_fat_surrogate,
    linear_example_prior,
    linear_example_sensor,
    linear_example_transition,
    radar_initial_belief,
    radar_rgf_sensor,
    radar_thin_noise,
    radar_fat_noise,
    radar_transition_model,
    radar_true_sensor,
    simulate_trajectory,
)
from .robust import rgf_update

KNOWN_FILTERS = ("gf-thin", "gf-fat", "rgf")
DEFAULT_SWEEP_PAIRS = (
    ("matched", 0.1, 10.0),
    ("under", 0.001, 1.0),
    ("over", 0.5, 100.0),
)

# Stream ids keep every consumer of randomness on its own child sequence
# of (seed, stream); results for a seed never depend on the seed list.
_SIM_STREAM = 0
_FILTER_STREAMS = {"gf-thin": 1, "gf-fat": 2, "rgf": 3}
_SWEEP_STREAM = 4

RADAR_DIVERGENCE_KM = 1e3


class BenchmarkError(RuntimeError):
    """A run failed numerically; carries the scenario and seed."""

    def __init__(self, scenario, seed, cause):
        super().__init__(f"scenario '{scenario}', seed {seed}: {cause}")
        self.scenario = scenario
        self.seed = seed


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of one benchmark invocation."""

    scenario: str
    seeds: tuple[int, ...]
    filters: tuple[str, ...] = KNOWN_FILTERS
    backend: str = "monte-carlo"
    num_samples: int = 1000
    steps: int = 50
    tail_weight: float = 0.1  # RGF model parameters (linear scenario)
    tail_scale: float = 10.0
    sim_tail_weight: float = 0.1  # simulation-side contamination (linear scenario)
    sim_tail_scale: float = 10.0
    sweep_pairs: tuple[tuple[str, float, float], ...] = DEFAULT_SWEEP_PAIRS
    radar_constants: RadarConstants = field(default_factory=RadarConstants)
    duration_s: float = 100.0

    def __post_init__(self):
        if self.scenario not in ("linear-example", "radar", "sweep"):
            raise ValueError(f"unknown scenario '{self.scenario}'")
        if len(self.seeds) < 1:
            raise ValueError("at least one seed is required")
        if self.backend not in ("monte-carlo", "unscented"):
            raise ValueError(f"unknown backend '{self.backend}'")
        unknown = set(self.filters) - set(KNOWN_FILTERS)
        if unknown:
            raise ValueError(f"unknown filters: {sorted(unknown)}")
        if self.scenario == "sweep" and len(self.sweep_pairs) < 2:
            raise ValueError("sweep requires at least two (weight, scale) pairs")

    def echo(self) -> dict:
        """Fully-resolved configuration for the summary output."""
        out = {
            "scenario": self.scenario,
            "seeds": list(self.seeds),
            "filters": list(self.filters),
            "backend": self.backend,
            "num_samples": self.num_samples,
            "steps": self.steps,
            "tail_weight": self.tail_weight,
            "tail_scale": self.tail_scale,
            "sim_tail_weight": self.sim_tail_weight,
            "sim_tail_scale": self.sim_tail_scale,
        }
        if self.scenario == "sweep":
            out["sweep_pairs"] = [list(p) for p in self.sweep_pairs]
        if self.scenario == "radar":
            c = self.radar_constants
            out["duration_s"] = self.duration_s
            out["radar_constants"] = {
                "delta_s": c.delta_s,
                "sigma_v": c.sigma_v,
                "beta0": c.beta0,
                "H0": c.H0,
                "Gm0": c.Gm0,
                "R0": c.R0,
                "sigma_nom_r": c.sigma_nom_r,
                "sigma_con_r": c.sigma_con_r,
                "sigma_nom_theta_mrad": c.sigma_nom_theta_mrad,
                "sigma_con_theta_mrad": c.sigma_con_theta_mrad,
                "alpha": c.alpha,
                "radar_position": list(map(float, c.radar_position)),
            }
        return out


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence((seed, stream)))


def _make_backend(config: ExperimentConfig, seed: int, stream: int):
    if config.backend == "monte-carlo":
        return gf.MonteCarloBackend(config.num_samples, seed=np.random.SeedSequence((seed, stream)))
    return gf.UnscentedBackend()


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("RGF_THREADS")
    workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(workers, n_jobs))


def _map_seeds(job, seeds):
    workers = _worker_count(len(seeds))
    if workers <= 1:
        return [job(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, seeds))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class FilterMetrics:
    """Deterministic error summaries of one filter on one trajectory."""

    rmse: np.ndarray  # per state dimension
    median_abs_error: np.ndarray  # per state dimension
    spikes: tuple[float, ...]  # one per tail-drawn measurement
    position_error: np.ndarray | None  # per-step 2D error (radar)
    diverged_at: int | None

    @property
    def max_spike(self) -> float:
        return max(self.spikes) if self.spikes else float("nan")

    @property
    def time_avg_position_error(self) -> float:
        if self.position_error is None or self.position_error.size == 0:
            return float("nan")
        return float(self.position_error.mean())


def compute_metrics(log: TrajectoryLog, track: FilterTrack, position_dims=None) -> FilterMetrics:
    """Error summaries of a filter track against the logged truth.

    Metrics cover the steps before any divergence.  Spikes take the peak
    error norm within one step of each tail-drawn measurement (the error
    norm is the 2D position error when ``position_dims`` is given, the
    full-state Euclidean error otherwise).
    """
    steps = track.valid_steps
    if log.steps == 0 or steps == 0:
        raise ValueError("cannot compute metrics on an empty log")
    err = track.means[:steps] - log.states[:steps]
    rmse = np.sqrt(np.mean(err**2, axis=0))
    median_abs = np.median(np.abs(err), axis=0)
    if position_dims is not None:
        pos_err = np.linalg.norm(err[:, list(position_dims)], axis=1)
        spike_series = pos_err
    else:
        pos_err = None
        spike_series = np.linalg.norm(err, axis=1)
    spikes = []
    for idx in np.flatnonzero(log.tail_mask[:steps]):
        window = spike_series[max(idx - 1, 0) : min(idx + 2, steps)]
        spikes.append(float(window.max()))
    return FilterMetrics(rmse, median_abs, tuple(spikes), pos_err, track.diverged_at)


@dataclass
class MetricsReport:
    """Per-seed metrics for every filter of one scenario."""

    scenario: str
    seeds: tuple[int, ...]
    filters: tuple[str, ...]
    per_seed: dict[str, list[FilterMetrics]]

    def metrics(self, name: str) -> list[FilterMetrics]:
        return self.per_seed[name]

    def rmse_matrix(self, name: str) -> np.ndarray:
        return np.array([m.rmse for m in self.per_seed[name]])

    def median_rmse(self, name: str) -> np.ndarray:
        """Median over seeds of the per-dimension RMSE."""
        return np.median(self.rmse_matrix(name), axis=0)

    def median_time_avg_position_error(self, name: str) -> float:
        vals = [m.time_avg_position_error for m in self.per_seed[name]]
        return float(np.median(vals))

    def diverged_seeds(self, name: str) -> list[int]:
        return [s for s, m in zip(self.seeds, self.per_seed[name]) if m.diverged_at is not None]

    def spike_win_fraction(self, name_a: str, name_b: str) -> float:
        """Fraction of seeds where ``name_a`` has the smaller worst spike.

        Seeds whose trajectory contains no tail-drawn measurement carry
        no spike statistic and are excluded from the comparison.
        """
        wins = total = 0
        for ma, mb in zip(self.per_seed[name_a], self.per_seed[name_b]):
            if not ma.spikes and not mb.spikes:
                continue
            total += 1
            if ma.max_spike < mb.max_spike:
                wins += 1
        return wins / total if total else float("nan")

    def summary(self) -> dict:
        out = {}
        for name in self.filters:
            entry = {
                "median_rmse": [float(v) for v in self.median_rmse(name)],
                "per_seed_rmse": [[float(v) for v in m.rmse] for m in self.per_seed[name]],
                "median_abs_error": [
                    float(v) for v in np.median([m.median_abs_error for m in self.per_seed[name]], axis=0)
                ],
                "diverged_seeds": self.diverged_seeds(name),
            }
            spikes = [m.max_spike for m in self.per_seed[name] if m.spikes]
            entry["median_max_spike"] = float(np.median(spikes)) if spikes else None
            pos = [
                m.time_avg_position_error
                for m in self.per_seed[name]
                if m.position_error is not None
            ]
            entry["median_time_avg_position_error"] = float(np.median(pos)) if pos else None
            out[name] = entry
        return out


# ---------------------------------------------------------------------------
# Filter driver
# ---------------------------------------------------------------------------


def run_filter_over_log(
    log: TrajectoryLog,
    prior: gf.GaussianBelief,
    transition,
    update_fn,
    backend,
    divergence_radius=None,
    position_dims=(0, 1),
) -> FilterTrack:
    """Predict every step, update on measurement steps, record estimates.

    Numerical failures and non-finite estimates truncate the track at
    that step instead of aborting the batch; ``divergence_radius`` adds
    a position-error cutoff for the radar scenario.
    """
    steps, dx = log.states.shape
    means = np.full((steps, dx), np.nan)
    covs = np.full((steps, dx, dx), np.nan)
    belief = prior
    diverged_at = None
    for t in range(1, steps + 1):
        try:
            belief = gf.predict(belief, transition, backend)
            if log.meas_mask[t - 1]:
                belief = update_fn(belief, log.measurements[t - 1], backend)
        except (NumericalError, ValueError, np.linalg.LinAlgError):
            diverged_at = t
            break
        if not np.all(np.isfinite(belief.mean)):
            diverged_at = t
            break
        if divergence_radius is not None:
            dims = list(position_dims)
            off = np.linalg.norm(belief.mean[dims] - log.states[t - 1, dims])
            if off > divergence_radius:
                diverged_at = t
                break
        means[t - 1] = belief.mean
        covs[t - 1] = belief.cov
    return FilterTrack(means, covs, diverged_at)


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------


def _linear_update_fn(name: str, config: ExperimentConfig):
    if name == "gf-thin":
        noise = standard_normal(1)
        return lambda b, y, bk: gf.update(b, lambda x, w: x + w, noise, y, bk)
    if name == "gf-fat":
        noise = linear_example_fat_surrogate(config.sim_tail_weight)
        return lambda b, y, bk: gf.update(b, lambda x, w: x + w, noise, y, bk)
    sensor = linear_example_sensor(config.tail_weight, config.tail_scale)
    return lambda b, y, bk: rgf_update(b, sensor, y, bk)


def run_linear_example(config: ExperimentConfig):
    """Scalar random-walk benchmark; returns (report, logs by seed)."""
    if config.scenario != "linear-example":
        raise ValueError("config.scenario must be 'linear-example'")
    transition = linear_example_transition()
    true_sensor = linear_example_sensor(config.sim_tail_weight, config.sim_tail_scale)
    prior_density = linear_example_prior()
    update_fns = {name: _linear_update_fn(name, config) for name in config.filters}

    def job(seed):
        try:
            log = simulate_trajectory(
                transition, true_sensor, prior_density, config.steps, 1, _rng(seed, _SIM_STREAM)
            )
        except SimulationError as exc:
            raise BenchmarkError(config.scenario, seed, exc) from exc
        prior = gf.GaussianBelief(prior_density.mean, prior_density.cov)
        for name in config.filters:
            backend = _make_backend(config, seed, _FILTER_STREAMS[name])
            log.estimates[name] = run_filter_over_log(
                log, prior, transition, update_fns[name], backend
            )
        return log

    logs = _map_seeds(job, config.seeds)
    per_seed = {
        name: [compute_metrics(log, log.estimates[name]) for log in logs]
        for name in config.filters
    }
    report = MetricsReport(config.scenario, config.seeds, config.filters, per_seed)
    return report, dict(zip(config.seeds, logs))


def run_sweep(config: ExperimentConfig):
    """RGF tail-parameter sensitivity; one variant per (weight, scale) pair.

    Every variant filters the identical simulated data with an
    identically-seeded backend, so a variant equal to the truth-matched
    parameters reproduces the matched run exactly.
    """
    if config.scenario != "sweep":
        raise ValueError("config.scenario must be 'sweep'")
    transition = linear_example_transition()
    true_sensor = linear_example_sensor(config.sim_tail_weight, config.sim_tail_scale)
    prior_density = linear_example_prior()
    labels = tuple(label for label, _, _ in config.sweep_pairs)
    sensors = {
        label: linear_example_sensor(weight, scale)
        for label, weight, scale in config.sweep_pairs
    }

    def job(seed):
        try:
            log = simulate_trajectory(
                transition, true_sensor, prior_density, config.steps, 1, _rng(seed, _SIM_STREAM)
            )
        except SimulationError as exc:
            raise BenchmarkError(config.scenario, seed, exc) from exc
        prior = gf.GaussianBelief(prior_density.mean, prior_density.cov)
        for label in labels:
            backend = _make_backend(config, seed, _SWEEP_STREAM)
            sensor = sensors[label]
            log.estimates[label] = run_filter_over_log(
                log, prior, transition,
                lambda b, y, bk, s=sensor: rgf_update(b, s, y, bk),
                backend,
            )
        return log

    logs = _map_seeds(job, config.seeds)
    per_seed = {
        label: [compute_metrics(log, log.estimates[label]) for log in logs]
        for label in labels
    }
    report = MetricsReport(config.scenario, config.seeds, labels, per_seed)
    return report, dict(zip(config.seeds, logs))


def _radar_update_fn(name: str, config: ExperimentConfig):
    c = config.radar_constants
    pos = c.radar_position

    def meas_fn(x, w):
        from .models import radar_measurement

        return radar_measurement(x, pos, w)

    if name == "gf-thin":
        noise = radar_thin_noise(c)
        return lambda b, y, bk: gf.update(b, meas_fn, noise, y, bk)
    if name == "gf-fat":
        noise = radar_fat_noise(c)
        return lambda b, y, bk: gf.update(b, meas_fn, noise, y, bk)
    sensor = radar_rgf_sensor(c)
    return lambda b, y, bk: rgf_update(b, sensor, y, bk)


def run_radar(config: ExperimentConfig):
    """Reentry tracking benchmark; returns (report, logs by seed)."""
    if config.scenario != "radar":
        raise ValueError("config.scenario must be 'radar'")
    c = config.radar_constants
    steps = round(config.duration_s / c.delta_s)
    meas_every = round(1.0 / c.delta_s)
    transition = radar_transition_model(c)
    true_sensor = radar_true_sensor(c)
    update_fns = {name: _radar_update_fn(name, config) for name in config.filters}

    def job(seed):
        try:
            log = simulate_trajectory(
                transition, true_sensor, None, steps, meas_every,
                _rng(seed, _SIM_STREAM), x0=RADAR_INITIAL_STATE,
            )
        except SimulationError as exc:
            raise BenchmarkError(config.scenario, seed, exc) from exc
        for name in config.filters:
            backend = _make_backend(config, seed, _FILTER_STREAMS[name])
            log.estimates[name] = run_filter_over_log(
                log, radar_initial_belief(), transition, update_fns[name], backend,
                divergence_radius=RADAR_DIVERGENCE_KM,
            )
        return log

    logs = _map_seeds(job, config.seeds)
    per_seed = {
        name: [
            compute_metrics(log, log.estimates[name], position_dims=(0, 1)) for log in logs
        ]
        for name in config.filters
    }
    report = MetricsReport(config.scenario, config.seeds, config.filters, per_seed)
    return report, dict(zip(config.seeds, logs))


def run_scenario(config: ExperimentConfig):
    if config.scenario == "linear-example":
        return run_linear_example(config)
    if config.scenario == "sweep":
        return run_sweep(config)
    return run_radar(config)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def csv_lines(logs: dict[int, TrajectoryLog], filters) -> list[str]:
    """CSV rows, one per (seed, step), sorted, with 17 significant digits.

    Measurement cells are empty on predict-only steps; estimate cells
    are empty after a filter diverged.
    """
    seeds = sorted(logs)
    first = logs[seeds[0]]
    dx = first.states.shape[1]
    dy = first.measurements.shape[1]
    header = ["seed", "t"]
    header += [f"x_true_{i}" for i in range(dx)]
    header += [f"y_{j}" for j in range(dy)]
    for name in filters:
        header += [f"{name}_mean_{i}" for i in range(dx)]
        header += [f"{name}_std_{i}" for i in range(dx)]
    lines = [",".join(header)]
    for seed in seeds:
        log = logs[seed]
        for t in range(1, log.steps + 1):
            row = [str(seed), str(t)]
            row += [_fmt(v) for v in log.states[t - 1]]
            if log.meas_mask[t - 1]:
                row += [_fmt(v) for v in log.measurements[t - 1]]
            else:
                row += [""] * dy
            for name in filters:
                track = log.estimates[name]
                if t <= track.valid_steps:
                    row += [_fmt(v) for v in track.means[t - 1]]
                    row += [_fmt(v) for v in np.sqrt(np.diag(track.covs[t - 1]))]
                else:
                    row += [""] * (2 * dx)
            lines.append(",".join(row))
    return lines


def write_csv(path, logs, filters):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(csv_lines(logs, filters)))
        fh.write("\n")


def write_summary(path, report: MetricsReport, config: ExperimentConfig):
    import json

    payload = {
        "scenario": report.scenario,
        "config": config.echo(),
        "filters": report.summary(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
