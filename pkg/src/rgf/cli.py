"""``rgf-bench``: configure, run, and export the benchmark experiments.

Subcommands ``linear``, ``radar``, and ``sweep`` run the corresponding
scenario and write a per-step CSV plus a JSON summary that echoes the
fully-resolved configuration.  ``selftest`` runs the embedded invariant
checks and reports one line per check.

Exit codes: 0 on success, 2 on configuration errors (with a usage
message), 1 on numerical failure naming the scenario and seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .benchmarks import (
    DEFAULT_SWEEP_PAIRS,
    BenchmarkError,
    ExperimentConfig,
    run_scenario,
    write_csv,
    write_summary,
)
from .linalg import NumericalError
from .models import RadarConstants, SimulationError, radar_constants_from_json


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rgf-bench",
        description="Benchmarks for robust Gaussian filtering with fat-tailed sensors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, default_seeds):
        p.add_argument("--seeds", type=int, default=default_seeds,
                       help="number of seeds to run (default %(default)s)")
        p.add_argument("--seed-offset", type=int, default=0,
                       help="first seed value (default %(default)s)")
        p.add_argument("--samples", type=int, default=1000,
                       help="Monte Carlo sample count (default %(default)s)")
        p.add_argument("--backend", choices=("monte-carlo", "unscented"),
                       default="monte-carlo", help="integration backend")
        p.add_argument("--out", help="CSV output path (one row per seed and step)")
        p.add_argument("--summary", help="JSON summary output path")

    p_lin = sub.add_parser("linear", help="scalar random walk with Cauchy-contaminated measurements")
    add_common(p_lin, default_seeds=100)
    p_lin.add_argument("--filters", default="gf-thin,gf-fat,rgf",
                       help="comma list of filters to run (default %(default)s)")
    p_lin.add_argument("--steps", type=int, default=50, help="trajectory length")
    p_lin.add_argument("--omega", type=float, default=0.1,
                       help="tail weight assumed by the robust filter")
    p_lin.add_argument("--gamma", type=float, default=10.0,
                       help="tail scale assumed by the robust filter")

    p_rad = sub.add_parser("radar", help="reentry vehicle tracking with glint noise")
    add_common(p_rad, default_seeds=20)
    p_rad.add_argument("--config", help="JSON file overriding the scenario constants")

    p_swp = sub.add_parser("sweep", help="robust-filter sensitivity to tail parameters")
    add_common(p_swp, default_seeds=100)
    p_swp.add_argument("--steps", type=int, default=50, help="trajectory length")
    p_swp.add_argument("--omega", default=None,
                       help="comma list of tail weights (paired with --gamma)")
    p_swp.add_argument("--gamma", default=None,
                       help="comma list of tail scales (paired with --omega)")
    p_swp.add_argument("--pairs", default=None,
                       help="comma list of labels for the (omega, gamma) pairs")

    sub.add_parser("selftest", help="run embedded invariant checks")
    return parser


def _seed_tuple(args) -> tuple[int, ...]:
    if args.seeds < 1:
        raise ValueError("--seeds must be at least 1")
    return tuple(range(args.seed_offset, args.seed_offset + args.seeds))


def _sweep_pairs(args):
    if args.omega is None and args.gamma is None and args.pairs is None:
        return DEFAULT_SWEEP_PAIRS
    if args.omega is None or args.gamma is None:
        raise ValueError("--omega and --gamma must be given together")
    weights = [float(v) for v in args.omega.split(",")]
    scales = [float(v) for v in args.gamma.split(",")]
    if len(weights) != len(scales):
        raise ValueError("--omega and --gamma lists must have equal length")
    if args.pairs is None:
        labels = [f"pair{i}" for i in range(len(weights))]
    else:
        labels = args.pairs.split(",")
        if len(labels) != len(weights):
            raise ValueError("--pairs must name every (omega, gamma) pair")
    return tuple(zip(labels, weights, scales))


def _config_from_args(args) -> ExperimentConfig:
    seeds = _seed_tuple(args)
    if args.command == "linear":
        return ExperimentConfig(
            scenario="linear-example",
            seeds=seeds,
            filters=tuple(args.filters.split(",")),
            backend=args.backend,
            num_samples=args.samples,
            steps=args.steps,
            tail_weight=args.omega,
            tail_scale=args.gamma,
        )
    if args.command == "radar":
        constants = radar_constants_from_json(args.config) if args.config else RadarConstants()
        return ExperimentConfig(
            scenario="radar",
            seeds=seeds,
            backend=args.backend,
            num_samples=args.samples,
            radar_constants=constants,
        )
    return ExperimentConfig(
        scenario="sweep",
        seeds=seeds,
        backend=args.backend,
        num_samples=args.samples,
        steps=args.steps,
        sweep_pairs=_sweep_pairs(args),
    )


def _headline(report) -> dict:
    out = {}
    for name in report.filters:
        entry = {"median_rmse": [float(v) for v in report.median_rmse(name)]}
        pos = report.median_time_avg_position_error(name)
        if np.isfinite(pos):
            entry["median_time_avg_position_error_km"] = pos
        diverged = report.diverged_seeds(name)
        if diverged:
            entry["diverged_seeds"] = diverged
        out[name] = entry
    return out


def _run_benchmark(args, usage: str) -> int:
    try:
        config = _config_from_args(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(usage, file=sys.stderr, end="")
        print(f"rgf-bench {args.command}: error: {exc}", file=sys.stderr)
        return 2
    try:
        report, logs = run_scenario(config)
    except BenchmarkError as exc:
        print(f"rgf-bench {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, SimulationError) as exc:
        print(f"rgf-bench {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    if args.out:
        write_csv(args.out, logs, report.filters)
    if args.summary:
        write_summary(args.summary, report, config)
    echo = {"config": config.echo(), "results": _headline(report)}
    print(json.dumps(echo, indent=2, sort_keys=True))
    if args.out:
        print(f"wrote {args.out}", file=sys.stderr)
    if args.summary:
        print(f"wrote {args.summary}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Self test
# ---------------------------------------------------------------------------


def _check_feature_normalization() -> bool:
    from .distributions import CauchyDensity
    from .models import ShiftedTail
    from .robust import FeatureContext, feature

    rng = np.random.default_rng(7)
    for _ in range(2000):
        m = int(rng.integers(1, 4))
        sqrt_c = rng.normal(size=(m, m))
        cov = sqrt_c @ sqrt_c.T + 0.1 * np.eye(m)
        tail = ShiftedTail(
            lambda x, m=m: np.broadcast_to(x[..., :1], x.shape[:-1] + (m,)),
            CauchyDensity(np.zeros(m), rng.uniform(0.5, 30.0, size=m)),
        )
        ctx = FeatureContext(
            rng.normal(size=2), rng.normal(size=m), cov, tail, rng.uniform(0.0, 1.0)
        )
        y = rng.standard_cauchy(size=m) * 10.0 ** rng.integers(-1, 7)
        phi = feature(y, ctx)
        if phi.c0 + phi.c2 != 1.0 or not np.array_equal(phi.c1, y * phi.c0):
            return False
        if not (0.0 <= phi.c0 <= 1.0 and np.all(np.isfinite(phi.to_array()))):
            return False
    return True


def _check_kf_equivalence() -> bool:
    from .distributions import GaussianDensity
    from .gf import ExactLinearBackend, GaussianBelief, UnscentedBackend, update

    rng = np.random.default_rng(11)
    for dx, dy in [(1, 1), (2, 2), (4, 3)]:
        A = rng.normal(size=(dy, dx))
        a = rng.normal(size=dy)
        sqrt_p = rng.normal(size=(dy, dy))
        P = sqrt_p @ sqrt_p.T + 0.5 * np.eye(dy)
        mean = rng.normal(size=dx)
        sqrt_s = rng.normal(size=(dx, dx))
        cov = sqrt_s @ sqrt_s.T + 0.5 * np.eye(dx)
        y = rng.normal(size=dy)

        innov_cov = A @ cov @ A.T + P
        gain = cov @ A.T @ np.linalg.inv(innov_cov)
        ref_mean = mean + gain @ (y - A @ mean - a)
        ref_cov = cov - gain @ innov_cov @ gain.T

        belief = GaussianBelief(mean, cov)
        sensor_fn = lambda x, w: x @ A.T + a + w
        noise = GaussianDensity(np.zeros(dy), P)
        scale = max(np.abs(ref_mean).max(), 1.0)
        for backend, tol in ((ExactLinearBackend(), 1e-10), (UnscentedBackend(), 1e-8)):
            post = update(belief, sensor_fn, noise, y, backend)
            if np.abs(post.mean - ref_mean).max() > tol * scale:
                return False
            if np.abs(post.cov - ref_cov).max() > tol * max(np.abs(ref_cov).max(), 1.0):
                return False
    return True


def _check_redescending_mean() -> bool:
    from .distributions import CauchyDensity
    from .models import LinearGaussianSensor, ShiftedTail
    from .robust import FeatureContext, approx_posterior_mean, gaussian_conditioning

    tail = ShiftedTail(lambda x: x, CauchyDensity([0.0], [10.0]))
    ctx = FeatureContext([0.0], [0.0], [[3.0]], tail, 0.1)
    D, d = gaussian_conditioning([0.0], [[2.0]], LinearGaussianSensor([[1.0]], [0.0], [[1.0]]))
    if abs(approx_posterior_mean([20.0], ctx, D, d)[0]) >= 0.05:
        return False
    prev = np.inf
    for y in np.arange(10.0, 101.0, 5.0):
        value = abs(approx_posterior_mean([y], ctx, D, d)[0])
        if value > prev + 1e-9:
            return False
        prev = value
    return True


def _check_omega_zero_reduction() -> bool:
    from .gf import GaussianBelief, UnscentedBackend, update
    from .models import linear_example_sensor
    from .robust import rgf_update

    belief = GaussianBelief([0.0], [[2.0]])
    sensor = linear_example_sensor(tail_weight=0.0)
    for y in (-1.5, 0.4, 3.0):
        plain = update(belief, sensor.body_fn, sensor.body_noise, [y], UnscentedBackend())
        robust = rgf_update(belief, sensor, [y], UnscentedBackend())
        if np.abs(robust.mean - plain.mean).max() > 1e-8:
            return False
        if np.abs(robust.cov - plain.cov).max() > 1e-8:
            return False
    return True


SELFTEST_CHECKS = (
    ("feature-normalization", "exact identities over 2000 random contexts", _check_feature_normalization),
    ("kf-equivalence", "tol 1e-10 exact-linear, 1e-8 unscented", _check_kf_equivalence),
    ("redescending-mean", "|mean(20)| < 0.05, decay on [10, 100]", _check_redescending_mean),
    ("omega-zero-reduction", "tol 1e-8 unscented", _check_omega_zero_reduction),
)


def selftest() -> int:
    """Run every embedded check; exit 0 iff all pass."""
    failed = 0
    for name, tolerance, check in SELFTEST_CHECKS:
        try:
            ok = bool(check())
        except Exception as exc:  # a crashed check is a failed check
            print(f"FAIL {name} ({tolerance}): {exc}")
            failed += 1
            continue
        print(f"{'PASS' if ok else 'FAIL'} {name} ({tolerance})")
        failed += 0 if ok else 1
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command == "selftest":
        return selftest()
    usage = {
        "linear": "usage: rgf-bench linear [--seeds N] [--steps N] [--samples N] ...\n",
        "radar": "usage: rgf-bench radar [--config JSON] [--seeds N] [--samples N] ...\n",
        "sweep": "usage: rgf-bench sweep [--omega LIST --gamma LIST [--pairs LIST]] ...\n",
    }[args.command]
    return _run_benchmark(args, usage)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
