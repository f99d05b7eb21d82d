"""Samplers built on an alternation between data fitting and denoising.

All three members separate the two halves of the posterior: a proximal
or Langevin move handles the measurements, a diffusion move handles the
prior.  They tolerate nonlinear operators (anything exposing a misfit
gradient) and are the samplers that can genuinely crash a stiff
simulator — so every model-side stability failure is converted into an
:class:`InstabilityError` that names the annealing stage it happened in.
"""
from __future__ import annotations

import numpy as np

from ..core.rng import RngStream
from ..errors import InstabilityError, StabilityError
from .common import (
    check_finite,
    clamp_estimate,
    ddim_transition,
    init_state,
    partial_reverse,
    reverse_ode,
    run_streams,
    sigma_grid,
    warped_sigmas,
)


def _prox_linear(model, y, x0, rho, sigma_y):
    # minimize ||Az - y||^2 / (2 sy^2) + rho/2 ||z - x0||^2 in closed form;
    # the regularizer keeps the null-space part of x0 intact
    reg = max(rho * sigma_y * sigma_y, 1e-12)
    return model.normal_solve(model.rmatvec(y) + reg * x0, reg)


def _prox_gradient(model, y, x0, rho, sigma_y, inner, lr0, backtrack):
    """Inner descent on the proximal objective for nonlinear operators."""
    inv_var = 1.0 / (sigma_y * sigma_y)
    z = x0.copy()
    scale = max(1.0, float(np.linalg.norm(x0)))

    def objective_grad(zz):
        value, grad = model.misfit(zz, y)
        obj = value * inv_var + 0.5 * rho * float(np.sum((zz - x0) ** 2))
        return obj, grad * inv_var + rho * (zz - x0)

    try:
        obj, grad = objective_grad(z)
        lr = lr0
        for _ in range(int(inner)):
            trial = z - lr * grad
            norm = float(np.linalg.norm(trial))
            if not np.isfinite(norm) or norm > 1e6 * scale:
                raise InstabilityError(
                    f"diffpir: inner descent diverged (iterate norm {norm:.3g})"
                )
            trial_obj, trial_grad = objective_grad(trial)
            if backtrack and (not np.isfinite(trial_obj) or trial_obj > obj):
                lr *= 0.5
                continue
            if not np.isfinite(trial_obj):
                raise InstabilityError(
                    f"diffpir: inner descent diverged (iterate norm {norm:.3g})"
                )
            z, obj, grad = trial, trial_obj, trial_grad
            if backtrack:
                lr *= 1.2
    except StabilityError as exc:
        norm = float(np.linalg.norm(z))
        raise InstabilityError(
            f"diffpir: inner descent left the simulator's stable region "
            f"(iterate norm {norm:.3g}): {exc}"
        ) from exc
    return z


def sample_diffpir(spec, prior, model, y, info=None):
    """Plug-and-play half-quadratic splitting inside the reverse chain.

    Per level the denoised estimate is pulled through the proximal
    operator of the data term with strength rho_t = lambda sy^2 /
    sigma_t^2, then renoised with a zeta-mix of the carried noise
    direction and a fresh draw.  Large lambda freezes the prox (prior
    sampling); the linear path is exact, the nonlinear path runs a
    backtracking inner descent.
    """
    gen, _ = run_streams(spec)
    sigmas = sigma_grid(spec)
    lam = float(spec.require("reg_lambda"))
    zeta = float(spec.get("zeta", 0.5))
    sigma_y = max(float(spec.get("noise_level", 0.1)), 1e-8)
    inner = int(spec.get("inner_iters", 20))
    inner_lr = float(spec.get("inner_lr", 1.0))
    backtrack = bool(spec.get("inner_backtrack", True))
    linear = model.capabilities.is_linear and not spec.get("force_gradient_prox", False)

    x = init_state(spec, prior, gen, sigmas)
    z = x
    for i, sigma in enumerate(sigmas):
        x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
        rho = lam * sigma_y * sigma_y / (sigma * sigma)
        if linear:
            z = _prox_linear(model, y, x0, rho, sigma_y)
        else:
            z = _prox_gradient(
                model, y, x0, rho, sigma_y, inner, inner_lr, backtrack
            )
        if i + 1 < len(sigmas):
            sigma_next = sigmas[i + 1]
            direction = (x - x0) / sigma
            x = z + sigma_next * (
                np.sqrt(max(1.0 - zeta, 0.0)) * direction
                + np.sqrt(zeta) * gen.standard_normal(x.shape)
            )
        else:
            x = z
        check_finite(x, "diffpir", f"step {i} (sigma={sigma:.3g})")
    return x


def _langevin(model, y, z, anchor, width, step, n_steps, inv_var, gen, label):
    """Unadjusted Langevin on data term + quadratic coupling to anchor."""
    eta = step * min(width * width, 1.0)
    for j in range(int(n_steps)):
        try:
            _, grad = model.misfit(z, y)
        except StabilityError as exc:
            raise InstabilityError(
                f"{label}: likelihood descent left the simulator's stable "
                f"region (coupling width {width:.3g}): {exc}"
            ) from exc
        drift = grad * inv_var + (z - anchor) / (width * width)
        z = z - eta * drift + np.sqrt(2.0 * eta) * gen.standard_normal(z.shape)
        if not np.all(np.isfinite(z)):
            raise InstabilityError(
                f"{label}: non-finite Langevin iterate "
                f"(coupling width {width:.3g}, inner step {j})"
            )
    return z


def sample_pnpdm(spec, prior, model, y, info=None):
    """Split Gibbs sampling with a diffusion prior move.

    Anneal a coupling width beta downward; at each stage run Langevin on
    the data term tethered to the current prior draw, then resample the
    prior variable by a partial reverse chain from the Langevin point.
    Zero Langevin steps degenerate to repeated prior sampling.
    """
    gen, gen_aux = run_streams(spec)
    stages = int(spec.require("anneal_steps"))
    beta0 = float(spec.require("anneal_sigma_max"))
    decay = float(spec.require("anneal_decay"))
    lmc_step = float(spec.require("langevin_step"))
    lmc_n = int(spec.require("langevin_steps"))
    sigma_y = max(float(spec.get("noise_level", 1.0)), 1e-8)
    prior_steps = int(spec.get("prior_steps", 15))
    sigma_min = spec.schedule.sigma_min
    inv_var = 1.0 / (sigma_y * sigma_y)

    x = prior.sample(RngStream(spec.seed).child(2))
    for k in range(stages):
        beta = beta0 * decay**k
        z = _langevin(
            model, y, x.copy(), x, beta, lmc_step, lmc_n, inv_var, gen_aux,
            f"pnpdm: annealing stage {k}",
        )
        noisy = z + beta * gen.standard_normal(z.shape)
        x = partial_reverse(prior, noisy, beta, prior_steps, gen, sigma_min)
        x = clamp_estimate(x, model, info)
        check_finite(x, "pnpdm", f"annealing stage {k} (beta={beta:.3g})")
    return x


def sample_daps(spec, prior, model, y, info=None):
    """Decoupled annealing: per noise level, estimate the clean state by a
    short probability-flow solve, explore the data term by Langevin around
    that anchor, then renoise to the next level.  Zero Langevin steps
    degenerate to unconditional sampling."""
    gen, gen_aux = run_streams(spec)
    stages = int(spec.require("anneal_steps"))
    ode_steps = int(spec.require("ode_steps"))
    lmc_step = float(spec.require("langevin_step"))
    lmc_n = int(spec.require("langevin_steps"))
    sigma_y = max(float(spec.get("noise_level", 1.0)), 1e-8)
    step_decay = float(spec.get("step_decay", 1.0))
    sched = spec.schedule
    sigmas = warped_sigmas(sched.sigma_max, sched.sigma_min, stages, sched.rho)
    inv_var = 1.0 / (sigma_y * sigma_y)

    x = sigmas[0] * gen.standard_normal(prior.dim)
    z = x
    for i, sigma in enumerate(sigmas):
        x0 = reverse_ode(prior, x, sigma, ode_steps, sched.sigma_min)
        x0 = clamp_estimate(x0, model, info)
        frac = i / (stages - 1) if stages > 1 else 1.0
        z = _langevin(
            model, y, x0.copy(), x0, sigma, lmc_step * step_decay**frac,
            lmc_n, inv_var, gen_aux, f"daps: noise level {i}",
        )
        if i + 1 < len(sigmas):
            x = z + sigmas[i + 1] * gen.standard_normal(z.shape)
        check_finite(x, "daps", f"noise level {i} (sigma={sigma:.3g})")
    return z
