"""Particle-filter posterior samplers.

Both members evolve a weighted ensemble through the reverse diffusion
with the measurements folded in through a *tempered* likelihood whose
variance starts inflated at high noise and tightens to the measurement
noise as the ensemble descends.  The implementation is a twisted
sequential Monte Carlo scheme: proposals are the conjugate combination
of the reverse kernel with the next level's tempered likelihood, and the
incremental weight is the predictive evidence divided by the potential
already carried by the particle — so the data enters each level's target
exactly once and the final ensemble approximates the posterior, spread
included.

The two members differ in temperament: the filtering sampler keeps mild
stochasticity, tempers by the state's own noise level, and resamples
only on effective-sample-size collapse; the Monte-Carlo-guided sampler
runs ancestral transitions, tempers by the denoiser's residual variance,
and resamples every step.

The run report carries the ensemble bookkeeping: normalized weights, the
effective-sample-size history, and a degeneracy flag when the weights
sit on a single particle for most of the run.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .common import check_finite, run_streams, sigma_grid
from .guidance import _prior_variance

_SVAL_TOL = 1e-10


def systematic_resample(weights: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Ancestor indices by systematic resampling (one uniform draw)."""
    p = len(weights)
    positions = (gen.random() + np.arange(p)) / p
    return np.searchsorted(np.cumsum(weights), positions)


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logw.max())
    return w / w.sum()


def _ess(w: np.ndarray) -> float:
    return float(1.0 / np.sum(w * w))


def _spectral(model):
    f = model.svd_factors()
    s = np.asarray(f.singular_values, dtype=np.float64)
    u_mat = np.asarray(f.U, dtype=np.float64)
    v_mat = np.asarray(f.V, dtype=np.float64)
    alive = s > _SVAL_TOL * (s.max() if s.size else 1.0)
    return s, u_mat, v_mat, alive


def _transition_moments(x, x0, sigma, sigma_next, eta):
    ratio = sigma_next / sigma
    tau2 = (eta * sigma_next) ** 2 * max(1.0 - ratio * ratio, 0.0)
    det = np.sqrt(max(sigma_next * sigma_next - tau2, 0.0))
    return x0 + det * (x - x0) / sigma, tau2


def _finish(info, logw, ess_history, estimates):
    w = _normalize_log(logw)
    ess_history.append(_ess(w))
    if info is not None:
        degenerate = sum(1 for e in ess_history if e <= 1.0 + 1e-6)
        info["weights"] = w
        info["ess_history"] = np.array(ess_history)
        info["ensemble"] = estimates
        info["weight_degeneracy_warning"] = bool(
            len(ess_history) > 0 and degenerate > len(ess_history) / 2
        )
    return estimates[int(np.argmax(w))]


def _spectral_filter(spec, prior, model, y, info, *, eta, temper, always_resample,
                     label):
    """Shared twisted-SMC engine in the operator's spectral coordinates.

    ``temper`` maps a noise level to the squared half-width of the
    residual between the spectral state and the clean signal; the
    tempered likelihood for y_u at level sigma is
    N(s * xbar, sigma_y^2 + s^2 * temper(sigma)).
    """
    gen, gen_aux = run_streams(spec)
    sigmas = sigma_grid(spec)
    particles = int(spec.require("particles"))
    sigma_y = float(spec.get("noise_level", 0.0))
    if particles < 1:
        raise ConfigError(f"{label} needs at least one particle")

    s, u_mat, v_mat, alive = _spectral(model)
    s_a = s[alive]
    v_a = v_mat[:, alive]
    y_u = (u_mat.T @ y)[alive]

    def lik_var(sigma):
        return sigma_y**2 + s_a**2 * temper(sigma) + 1e-18

    dim = prior.dim
    x = sigmas[0] * gen.standard_normal((particles, dim))
    logw = np.zeros(particles)
    # potential already carried by each particle at the current level
    v0 = lik_var(float(sigmas[0]))
    xa = x @ v_a
    pot = -0.5 * np.sum((y_u - s_a * xa) ** 2 / v0 + np.log(v0), axis=1)
    logw += pot
    ess_history: list[float] = []

    for i in range(len(sigmas) - 1):
        sigma, sigma_next = float(sigmas[i]), float(sigmas[i + 1])
        w = _normalize_log(logw)
        ess_history.append(_ess(w))
        if always_resample or _ess(w) < particles / 2.0:
            idx = systematic_resample(w, gen_aux)
            x, pot = x[idx], pot[idx]
            logw[:] = 0.0
        x0 = prior.denoise_batch(x, sigma)
        mean, tau2 = _transition_moments(x, x0, sigma, sigma_next, eta)
        v_next = lik_var(sigma_next)
        ma = mean @ v_a
        # conjugate proposal: reverse kernel times next tempered likelihood
        prop_var = max(tau2, 1e-18)
        post_prec = 1.0 / prop_var + s_a**2 / v_next
        post_mean = (ma / prop_var + s_a * y_u / v_next) / post_prec
        coords = post_mean + gen.standard_normal(ma.shape) / np.sqrt(post_prec)
        x = mean + np.sqrt(tau2) * gen.standard_normal(x.shape)
        x = x + (coords - x @ v_a) @ v_a.T
        # evidence of the measurement under the kernel, per particle
        pred_var = v_next + prop_var * s_a**2
        evidence = -0.5 * np.sum(
            (y_u - s_a * ma) ** 2 / pred_var + np.log(pred_var), axis=1
        )
        logw += evidence - pot
        pot = -0.5 * np.sum(
            (y_u - s_a * coords) ** 2 / v_next + np.log(v_next), axis=1
        )
        check_finite(x, label, f"step {i} (sigma={sigma:.3g})")

    estimates = prior.denoise_batch(x, float(sigmas[-1]))
    return _finish(info, logw, ess_history, estimates)


def _bootstrap_filter(spec, prior, model, y, info, *, eta, temper, label):
    """Fallback for operators without a factorization: plain reverse-kernel
    proposals, isotropically tempered likelihood weights (evidence ratio),
    forward applications counted per particle."""
    gen, gen_aux = run_streams(spec)
    sigmas = sigma_grid(spec)
    particles = int(spec.require("particles"))
    sigma_y = float(spec.get("noise_level", 0.0))
    if particles < 1:
        raise ConfigError(f"{label} needs at least one particle")

    def lik_var(sigma):
        return sigma_y**2 + temper(sigma) + 1e-18

    dim = prior.dim
    x = sigmas[0] * gen.standard_normal((particles, dim))
    logw = np.zeros(particles)
    resid = y[None, :] - model.apply_batch(x)
    pot = -0.5 * np.sum(resid * resid, axis=1) / lik_var(float(sigmas[0]))
    logw += pot
    ess_history: list[float] = []

    for i in range(len(sigmas) - 1):
        sigma, sigma_next = float(sigmas[i]), float(sigmas[i + 1])
        w = _normalize_log(logw)
        ess_history.append(_ess(w))
        if _ess(w) < particles / 2.0:
            idx = systematic_resample(w, gen_aux)
            x, pot = x[idx], pot[idx]
            logw[:] = 0.0
        x0 = prior.denoise_batch(x, sigma)
        mean, tau2 = _transition_moments(x, x0, sigma, sigma_next, eta)
        x = mean + np.sqrt(tau2) * gen.standard_normal(x.shape)
        resid = y[None, :] - model.apply_batch(x)
        new_pot = -0.5 * np.sum(resid * resid, axis=1) / lik_var(sigma_next)
        logw += new_pot - pot
        pot = new_pot
        check_finite(x, label, f"step {i} (sigma={sigma:.3g})")

    estimates = prior.denoise_batch(x, float(sigmas[-1]))
    return _finish(info, logw, ess_history, estimates)


def sample_fps(spec, prior, model, y, info=None):
    """Filtering posterior sampler.

    Tempering follows the state's own noise level (the clean signal sits
    sigma away from the state), transitions keep mild stochasticity, and
    resampling triggers on effective-sample-size collapse below half the
    ensemble.  Returns the highest-weight particle's denoised estimate;
    the full weighted ensemble lands in the run report.
    """
    eta = float(spec.get("eta", 0.9))
    if model.capabilities.has_svd:
        return _spectral_filter(
            spec, prior, model, y, info,
            eta=eta, temper=lambda sigma: sigma * sigma,
            always_resample=False, label="fps",
        )
    return _bootstrap_filter(
        spec, prior, model, y, info,
        eta=eta, temper=lambda sigma: sigma * sigma, label="fps",
    )


def sample_mcgdiff(spec, prior, model, y, info=None):
    """Monte-Carlo-guided diffusion.

    Ancestral transitions, likelihood tempered by the denoiser's residual
    variance c sigma^2 / (c + sigma^2) (tighter than the raw noise level
    once the prior becomes informative), resampling every step.
    """
    c = _prior_variance(spec, prior)
    if not model.capabilities.has_svd:
        raise ConfigError("mcgdiff requires an operator with a factorization")
    return _spectral_filter(
        spec, prior, model, y, info,
        eta=1.0, temper=lambda sigma: c * sigma * sigma / (c + sigma * sigma),
        always_resample=True, label="mcgdiff",
    )
