"""Variational reconstruction with a score-matching regularizer.

Instead of simulating the reverse chain, optimize a point estimate: at
every iteration draw a random noise level, renoise the current estimate,
and compare the denoiser's noise prediction with the injected noise.
That difference is an unbiased score-matching gradient; adding the
weighted data-misfit gradient yields a stochastic objective whose
minimizer balances prior plausibility against the measurements.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .common import check_finite, clamp_estimate, run_streams, sigma_grid


def _schedule_weight(kind: str, sigma: float, sigma_max: float) -> float:
    if kind == "constant":
        return 1.0
    if kind == "linear":
        return sigma / sigma_max
    if kind == "sqrt":
        return float(np.sqrt(sigma / sigma_max))
    raise ConfigError(f"unknown regularizer schedule {kind!r}")


def sample_reddiff(spec, prior, model, y, info=None):
    gen, gen_aux = run_streams(spec)
    sigmas = sigma_grid(spec)
    lr = float(spec.require("lr"))
    momentum = float(spec.get("momentum", 0.9))
    reg_base = float(spec.require("reg_base"))
    schedule = spec.get("reg_schedule", "constant")
    grad_weight = float(spec.require("grad_weight"))
    sigma_max = float(sigmas[0])
    # validate the schedule name up front, not on iteration 1
    _schedule_weight(schedule, sigma_max, sigma_max)

    mu = np.zeros(prior.dim)
    velocity = np.zeros_like(mu)
    for t in range(len(sigmas)):
        sigma = float(sigmas[gen_aux.integers(len(sigmas))])
        eps = gen.standard_normal(mu.shape)
        noisy = mu + sigma * eps
        x0 = prior.denoise(noisy, sigma).x0_hat
        eps_hat = (noisy - x0) / sigma
        reg_grad = (eps_hat - eps) * reg_base * _schedule_weight(
            schedule, sigma, sigma_max
        )
        if grad_weight != 0.0:
            _, data_grad = model.misfit(mu, y)
            grad = grad_weight * data_grad + reg_grad
        else:
            grad = reg_grad
        velocity = momentum * velocity - lr * grad
        mu = clamp_estimate(mu + velocity, model, info)
        check_finite(mu, "reddiff", f"iteration {t} (sigma={sigma:.3g})")
    return mu
