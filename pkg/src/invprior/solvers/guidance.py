"""Samplers that steer the reverse diffusion with a data-misfit pull.

The family shares one skeleton: denoise the state, form a gradient-like
correction of the measurement residual at the denoised point, push it
back through the denoiser Jacobian, and subtract it from the usual
reverse transition.  Members differ in how the correction is built —
exact gradient, Monte-Carlo smoothed gradient, probe-based zeroth-order
estimate, or a regularized normal-equation solve.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .common import (
    check_finite,
    clamp_estimate,
    ddim_transition,
    init_state,
    run_streams,
    scaled_guidance,
    sigma_grid,
)


def sample_dps(spec, prior, model, y, info=None):
    """Posterior sampling with a per-step misfit gradient at the denoised
    point, scaled by the residual norm ("norm" convention) or used raw."""
    gen, _ = run_streams(spec)
    sigmas = sigma_grid(spec)
    scale = float(spec.require("guidance_scale"))
    eta = float(spec.get("eta", 1.0))
    convention = spec.get("guidance_convention", "norm")

    x = init_state(spec, prior, gen, sigmas)
    for i, sigma in enumerate(sigmas):
        x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
        value, grad = model.misfit(x0, y)
        pull = prior.denoiser_vjp(x, sigma, grad)
        guidance = scaled_guidance(pull, value, scale, convention)
        if i + 1 < len(sigmas):
            x = ddim_transition(x, x0, sigma, sigmas[i + 1], eta, gen) - guidance
        else:
            x = x0 - guidance
        check_finite(x, "dps", f"step {i} (sigma={sigma:.3g})")
    return x


def sample_lgd(spec, prior, model, y, info=None):
    """Monte-Carlo variant: the misfit gradient is averaged over jittered
    copies of the denoised point with softmax weights, approximating the
    gradient of a smoothed likelihood.

    With one sample and zero jitter this reduces to :func:`sample_dps`
    step for step (the jitter draws come from an auxiliary stream so the
    trajectory noise stays aligned).
    """
    gen, gen_aux = run_streams(spec)
    sigmas = sigma_grid(spec)
    scale = float(spec.require("guidance_scale"))
    n_mc = int(spec.require("mc_samples"))
    perturbation = float(spec.get("perturbation", 1.0))
    eta = float(spec.get("eta", 1.0))
    convention = spec.get("guidance_convention", "norm")
    if n_mc < 1:
        raise ConfigError("lgd needs at least one Monte-Carlo sample")

    x = init_state(spec, prior, gen, sigmas)
    for i, sigma in enumerate(sigmas):
        x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
        # jitter radius shrinks with the remaining noise level
        r = perturbation * sigma / np.sqrt(1.0 + sigma * sigma)
        samples = x0[None, :] + r * gen_aux.standard_normal((n_mc, x0.size))
        values, grads = model.misfit_batch(samples, y)
        shifted = -(values - values.min())
        weights = np.exp(shifted)
        weights /= weights.sum()
        grad = weights @ grads
        value = float(weights @ values)
        pull = prior.denoiser_vjp(x, sigma, grad)
        guidance = scaled_guidance(pull, value, scale, convention)
        if i + 1 < len(sigmas):
            x = ddim_transition(x, x0, sigma, sigmas[i + 1], eta, gen) - guidance
        else:
            x = x0 - guidance
        check_finite(x, "lgd", f"step {i} (sigma={sigma:.3g})")
    return x


def smoothed_gradient(model, z, y, mu, probes, gen, mode="central"):
    """Probe-based estimate of the misfit gradient at z.

    ``forward`` differencing spends probes + 1 evaluations, ``central``
    2 * probes; the central stencil is exactly unbiased for quadratic
    misfits.  Returns (gradient estimate, misfit value at z).
    """
    u = gen.standard_normal((int(probes), z.size))
    if mode == "forward":
        base = model.misfit_value(z, y)
        vals = model.misfit_value_batch(z[None, :] + mu * u, y)
        ghat = (vals - base) @ u / (probes * mu)
        return ghat, base
    if mode == "central":
        stacked = np.concatenate([z[None, :] + mu * u, z[None, :] - mu * u])
        vals = model.misfit_value_batch(stacked, y)
        plus, minus = vals[:probes], vals[probes:]
        ghat = (plus - minus) @ u / (2.0 * probes * mu)
        # midpoint average stands in for the unevaluated center value
        return ghat, float(0.5 * (plus.mean() + minus.mean()))
    raise ConfigError(f"unknown differencing mode {mode!r}")


def _sample_gsg(spec, prior, model, y, info, mode):
    gen, gen_aux = run_streams(spec)
    sigmas = sigma_grid(spec)
    scale = float(spec.require("guidance_scale"))
    probes = int(spec.get("probes", 32))
    mu = float(spec.get("smoothing", 1e-3))
    eta = float(spec.get("eta", 1.0))
    convention = spec.get("guidance_convention", "norm")

    x = init_state(spec, prior, gen, sigmas)
    for i, sigma in enumerate(sigmas):
        x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
        ghat, value = smoothed_gradient(model, x0, y, mu, probes, gen_aux, mode)
        pull = prior.denoiser_vjp(x, sigma, ghat)
        guidance = scaled_guidance(pull, value, scale, convention)
        if i + 1 < len(sigmas):
            x = ddim_transition(x, x0, sigma, sigmas[i + 1], eta, gen) - guidance
        else:
            x = x0 - guidance
        check_finite(x, mode + "-gsg", f"step {i} (sigma={sigma:.3g})")
    return x


def sample_fgsg(spec, prior, model, y, info=None):
    """Gradient-free guidance via forward-difference Gaussian smoothing."""
    return _sample_gsg(spec, prior, model, y, info, "forward")


def sample_cgsg(spec, prior, model, y, info=None):
    """Gradient-free guidance via central-difference Gaussian smoothing."""
    return _sample_gsg(spec, prior, model, y, info, "central")


def _prior_variance(spec, prior) -> float:
    given = spec.get("prior_variance")
    if given is not None:
        return float(given)
    spectrum = getattr(prior, "spectrum", None)
    if spectrum is not None:
        return float(np.mean(spectrum))
    return 1.0


def sample_pigdm(spec, prior, model, y, info=None):
    """Linear-operator guidance with an approximate posterior covariance.

    The denoised point is treated as carrying residual uncertainty
    r^2 = c sigma^2 / (c + sigma^2) (c = prior variance proxy); the pull
    solves the regularized normal equations so all observed directions
    are corrected at once, which makes the sampler exact for linear
    Gaussian problems up to discretization.
    """
    gen, _ = run_streams(spec)
    sigmas = sigma_grid(spec)
    eta = float(spec.get("eta", 0.2))
    scale = float(spec.get("guidance_scale", 1.0))
    sigma_y = float(spec.get("noise_level", 0.0))
    c = _prior_variance(spec, prior)

    x = init_state(spec, prior, gen, sigmas)
    x0_guided = None
    for i, sigma in enumerate(sigmas):
        x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
        r2 = c * sigma * sigma / (c + sigma * sigma)
        residual = y - model.apply(x0)
        g = model.normal_solve(
            model.rmatvec(residual), max(sigma_y * sigma_y / r2, 1e-12)
        )
        pull = prior.denoiser_vjp(x, sigma, g)
        x0_guided = x0 + scale * (sigma * sigma / r2) * pull
        if i + 1 < len(sigmas):
            x = ddim_transition(x, x0_guided, sigma, sigmas[i + 1], eta, gen)
        else:
            x = x0_guided
        check_finite(x, "pigdm", f"step {i} (sigma={sigma:.3g})")
    return x
