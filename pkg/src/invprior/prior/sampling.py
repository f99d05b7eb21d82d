"""Unconditional draws through the reverse process.

Default integrator is Heun's method on the probability-flow ODE
dx/dsigma = (x - x0_hat)/sigma; an Euler-Maruyama path for the reverse
SDE sits behind ``method="em"``.
"""
from __future__ import annotations

import numpy as np

from ..core.rng import RngStream
from .schedule import NoiseSchedule, discretize_schedule
from .score import ScorePrior


def sample_unconditional(
    prior: ScorePrior,
    sched: NoiseSchedule,
    rng: RngStream,
    method: str = "heun",
    x_init: np.ndarray | None = None,
) -> np.ndarray:
    gen = rng.generator()
    sigmas = discretize_schedule(sched)
    if x_init is None:
        x = sigmas[0] * gen.standard_normal(prior.dim)
    else:
        x = np.array(x_init, dtype=np.float64)
    if method == "heun":
        for i in range(len(sigmas) - 1):
            s, s_next = sigmas[i], sigmas[i + 1]
            d = (x - prior.denoise(x, s).x0_hat) / s
            x_euler = x + (s_next - s) * d
            d2 = (x_euler - prior.denoise(x_euler, s_next).x0_hat) / s_next
            x = x + (s_next - s) * 0.5 * (d + d2)
    elif method == "em":
        for i in range(len(sigmas) - 1):
            s, s_next = sigmas[i], sigmas[i + 1]
            delta = s * s - s_next * s_next
            score = prior.denoise(x, s).score
            x = x + delta * score + np.sqrt(delta) * gen.standard_normal(x.shape)
    else:
        raise ValueError(f"unknown sampler method {method!r}")
    return x


def sample_unconditional_field(prior, sched, rng, method="heun"):
    return sample_unconditional(prior, sched, rng, method).reshape(prior.shape)
