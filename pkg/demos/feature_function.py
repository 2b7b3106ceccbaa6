#!/usr/bin/env python3
"""A tour of the robust feature on a scalar example.

Setting: a random-walk state one step in, so the predicted belief is
N(0, 2).  The sensor has a Gaussian body y = x + w with unit noise and
a Cauchy tail of scale 10 carrying 10% of the mass.  The predicted
body measurement is then N(0, 3).

We look at two things:

1. the three feature components as functions of the measurement: the
   body responsibility c0, the gated measurement c1 = y * c0, and the
   tail responsibility c2 = 1 - c0;
2. the approximate posterior mean built from them, which is linear near
   the expected measurement and redescends to the prior mean for
   outliers.  A brute-force quadrature of Bayes' rule is overlaid to
   show how tight the approximation is.
"""

import pathlib

import numpy as np

from rgf import (
    CauchyDensity,
    FeatureContext,
    LinearGaussianSensor,
    ShiftedTail,
    approx_posterior_mean,
    feature,
    gaussian_conditioning,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

PRIOR_VAR = 2.0
TAIL_SCALE = 10.0
TAIL_WEIGHT = 0.1

tail = ShiftedTail(lambda x: x, CauchyDensity([0.0], [TAIL_SCALE]))
ctx = FeatureContext([0.0], [0.0], [[PRIOR_VAR + 1.0]], tail, TAIL_WEIGHT)

ys = np.linspace(-30.0, 30.0, 601)
phi = feature(ys[:, None], ctx)

# Gain and offset of exact Gaussian conditioning on the body alone.
D, d = gaussian_conditioning([0.0], [[PRIOR_VAR]], LinearGaussianSensor([[1.0]], [0.0], [[1.0]]))
approx_mean = approx_posterior_mean(ys[:, None], ctx, D, d)[:, 0]


def bayes_mean(y):
    """Trapezoid quadrature of the exact posterior mean (tail at the prior mean)."""
    xs = np.linspace(-12.0, 12.0, 50_000)
    prior = np.exp(-0.5 * xs**2 / PRIOR_VAR)
    body = np.exp(-0.5 * (y - xs) ** 2) / np.sqrt(2 * np.pi)
    tail_val = (1.0 / (np.pi * TAIL_SCALE)) / (1.0 + (y / TAIL_SCALE) ** 2)
    w = ((1 - TAIL_WEIGHT) * body + TAIL_WEIGHT * tail_val) * prior
    return np.trapezoid(xs * w, xs) / np.trapezoid(w, xs)


exact_mean = np.array([bayes_mean(y) for y in ys])

print("measurement   c0 (body)   c1 = y*c0   c2 (tail)   approx mean   exact mean")
for y in (0.0, 1.0, 3.0, 5.0, 8.0, 15.0, 30.0):
    p = feature([y], ctx)
    a = approx_posterior_mean([y], ctx, D, d)[0]
    print(f"{y:11.1f} {p.c0:11.4f} {p.c1[0]:11.4f} {p.c2:11.4f} {a:13.4f} {bayes_mean(y):12.4f}")
print()
print(f"max |approx - exact| over [-30, 30]: {np.abs(approx_mean - exact_mean).max():.2e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; skipping plots")
    raise SystemExit(0)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
ax1.plot(ys, phi.c0, label="c0: body responsibility")
ax1.plot(ys, phi.c1[:, 0], label="c1 = y * c0")
ax1.plot(ys, phi.c2, label="c2: tail responsibility")
ax1.set_xlabel("measurement y")
ax1.set_title("Feature components")
ax1.legend()

ax2.plot(ys, exact_mean, "k", lw=2.5, label="exact posterior mean (quadrature)")
ax2.plot(ys, approx_mean, "r--", lw=1.5, label="approximate mean from the feature")
ax2.plot(ys, (D[0, 0] * ys + d[0]), ":", color="gray", label="plain Kalman mean (affine)")
ax2.set_xlabel("measurement y")
ax2.set_title("Redescending posterior mean")
ax2.set_ylim(-2.5, 2.5)
ax2.legend()

fig.tight_layout()
fig.savefig(OUT / "feature_function.png", dpi=130)
print(f"wrote {OUT / 'feature_function.png'}")
