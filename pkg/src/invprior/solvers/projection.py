"""Samplers that enforce data consistency by projection.

Both members need structural access to the operator: a singular value
decomposition for the spectral sampler, a pseudo-inverse for the
null-space corrector.  Neither evaluates gradients, which is what makes
them cheap — and restricted to linear problems.
"""
from __future__ import annotations

import numpy as np

from .common import (
    check_finite,
    clamp_estimate,
    ddim_transition,
    init_state,
    run_streams,
    sigma_grid,
)

_SVAL_TOL = 1e-10


def sample_ddrm(spec, prior, model, y, info=None):
    """Spectral-space diffusion restoration.

    The state is split into observed singular directions and their
    complement.  Observed coordinates are pulled toward the rescaled
    measurements as soon as the remaining noise level drops below the
    per-coordinate measurement noise; the complement follows the plain
    reverse chain.  With an identity operator and zero noise the final
    state is exactly the data.
    """
    gen, _ = run_streams(spec)
    sigmas = sigma_grid(spec)
    eta = float(spec.get("eta", 0.85))
    eta_b = float(spec.get("eta_b", 1.0))
    sigma_y = float(spec.get("noise_level", 0.0))

    factors = model.svd_factors()
    s = np.asarray(factors.singular_values, dtype=np.float64)
    u_mat = np.asarray(factors.U, dtype=np.float64)
    v_mat = np.asarray(factors.V, dtype=np.float64)
    alive = s > _SVAL_TOL * (s.max() if s.size else 1.0)
    s_safe = np.where(alive, s, 1.0)
    # measurements mapped onto the signal's singular coordinates
    ybar = np.where(alive, (u_mat.T @ y) / s_safe, 0.0)
    noise_bar = np.where(alive, sigma_y / s_safe, np.inf)

    def split(vec):
        coords = v_mat.T @ vec
        return coords, vec - v_mat @ coords

    x = init_state(spec, prior, gen, sigmas)
    for i, sigma in enumerate(sigmas):
        x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
        sigma_next = sigmas[i + 1] if i + 1 < len(sigmas) else 0.0
        xbar, x_perp = split(x)
        x0bar, x0_perp = split(x0)
        xi = gen.standard_normal(x.shape)
        xibar, xi_perp = split(xi)

        drift = np.sqrt(max(1.0 - eta * eta, 0.0)) * sigma_next
        # coordinates still noisier than their measurement: drift toward
        # the data at unit-variance scale, keep marginal level sigma_next
        toward_data = x0bar + drift * (ybar - x0bar) / np.maximum(
            noise_bar, 1e-300
        ) + eta * sigma_next * xibar
        # coordinates already cleaner than the data: mix in the
        # measurement directly and top up with exactly enough noise
        top_up = np.sqrt(
            np.maximum(
                sigma_next * sigma_next
                - np.where(alive, (sigma_y * eta_b / s_safe) ** 2, 0.0),
                0.0,
            )
        )
        blend = (1.0 - eta_b) * x0bar + eta_b * ybar + top_up * xibar
        unconditional = (
            x0bar + drift * (xbar - x0bar) / sigma + eta * sigma_next * xibar
        )
        xbar_next = np.where(
            ~alive, unconditional, np.where(sigma_next < noise_bar, toward_data, blend)
        )
        perp_next = (
            x0_perp + drift * (x_perp - x0_perp) / sigma + eta * sigma_next * xi_perp
        )
        x = v_mat @ xbar_next + perp_next
        check_finite(x, "ddrm", f"step {i} (sigma={sigma:.3g})")
    return x


def sample_ddnm(spec, prior, model, y, info=None):
    """Null-space corrected denoising.

    Each denoised estimate has its observed component replaced through
    the pseudo-inverse, x0 <- x0 - A^+(A x0 - y), leaving the null-space
    content untouched; repeated transitions per level ("travel length")
    give the chain extra chances to harmonize the two parts.
    """
    gen, _ = run_streams(spec)
    sigmas = sigma_grid(spec)
    eta = float(spec.get("eta", 0.95))
    travel = max(int(spec.get("travel_length", 1)), 1)

    x = init_state(spec, prior, gen, sigmas)
    projected = None
    for i, sigma in enumerate(sigmas):
        sigma_next = sigmas[i + 1] if i + 1 < len(sigmas) else 0.0
        for rep in range(travel):
            x0 = clamp_estimate(prior.denoise(x, sigma).x0_hat, model, info)
            projected = x0 - model.pinv_apply(model.apply(x0) - y)
            x = ddim_transition(x, projected, sigma, sigma_next, eta, gen)
            if rep + 1 < travel and sigma_next > 0:
                # renoise back up for another pass at this level
                gap = np.sqrt(max(sigma * sigma - sigma_next * sigma_next, 0.0))
                x = x + gap * gen.standard_normal(x.shape)
        check_finite(x, "ddnm", f"step {i} (sigma={sigma:.3g})")
    return x
