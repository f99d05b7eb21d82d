"""Shared pieces of the posterior samplers.

All samplers run the variance-exploding convention: a state x at noise
level sigma decomposes as x = x0 + sigma * eps.  The transition helper
implements the eta-interpolated update between the deterministic flow
(eta = 0) and ancestral sampling (eta = 1); every sampler funnels its
per-step move through it so the stochasticity dial means the same thing
everywhere.
"""
from __future__ import annotations

import numpy as np

from ..core.rng import RngStream
from ..errors import ConfigError, InstabilityError
from ..prior.schedule import discretize_schedule


def sigma_grid(spec) -> np.ndarray:
    """Decreasing noise grid for a run; ``num_steps`` in params wins over
    the schedule's own step count."""
    steps = spec.num_steps(spec.schedule.num_steps)
    return discretize_schedule(spec.schedule.with_steps(steps))


def warped_sigmas(hi: float, lo: float, n: int, rho: float = 7.0) -> np.ndarray:
    """Power-law-warped grid from hi down to lo with n points."""
    if not (0 < lo <= hi):
        raise ConfigError("need 0 < lo <= hi for a noise grid")
    if n == 1:
        return np.array([hi])
    i = np.arange(n)
    a, b = lo ** (1.0 / rho), hi ** (1.0 / rho)
    out = (b + i / (n - 1) * (a - b)) ** rho
    out[0], out[-1] = hi, lo
    return out


def ddim_transition(
    x: np.ndarray,
    x0: np.ndarray,
    sigma: float,
    sigma_next: float,
    eta: float,
    gen: np.random.Generator,
) -> np.ndarray:
    """One reverse step sigma -> sigma_next around the denoised anchor.

    The injected noise has standard deviation tau with
    tau^2 = eta^2 sigma_next^2 (sigma^2 - sigma_next^2)/sigma^2, which
    reproduces the ancestral posterior bridge at eta = 1 and the
    deterministic flow at eta = 0; the retained direction is rescaled so
    the marginal level lands exactly on sigma_next.
    """
    if sigma_next <= 0:
        return x0.copy()
    ratio = sigma_next / sigma
    tau2 = (eta * sigma_next) ** 2 * max(1.0 - ratio * ratio, 0.0)
    det = np.sqrt(max(sigma_next * sigma_next - tau2, 0.0))
    out = x0 + det * (x - x0) / sigma
    if tau2 > 0:
        out = out + np.sqrt(tau2) * gen.standard_normal(x.shape)
    return out


def clamp_estimate(x0: np.ndarray, model, info: dict | None) -> np.ndarray:
    """Clip a denoised estimate into the model's declared validity square
    (a no-op for models without one); clamping events are logged."""
    rng = getattr(model, "clamp_range", None)
    if rng is None:
        return x0
    lo, hi = rng
    clipped = np.clip(x0, lo, hi)
    if info is not None and (clipped != x0).any():
        info["clamped_steps"] = info.get("clamped_steps", 0) + 1
    return clipped


def scaled_guidance(
    pull: np.ndarray, misfit_value: float, scale: float, convention: str
) -> np.ndarray:
    """Turn a raw data-misfit pull into the guidance increment.

    "norm" divides by the residual norm (the gradient of the *norm*, not
    the squared misfit), "raw" leaves the squared-misfit gradient as is.
    """
    if convention == "norm":
        return scale * pull / max(np.sqrt(2.0 * max(misfit_value, 0.0)), 1e-12)
    if convention == "raw":
        return scale * pull
    raise ConfigError(f"unknown guidance convention {convention!r}")


def check_finite(x: np.ndarray, algorithm: str, context: str) -> None:
    if not np.all(np.isfinite(x)):
        raise InstabilityError(f"{algorithm}: non-finite iterate at {context}")


def reverse_ode(prior, x: np.ndarray, sigma_from: float, steps: int, sigma_min: float):
    """Heun probability-flow integration from sigma_from down to
    sigma_min, returning the final denoised state.  Used wherever a
    sampler needs a cheap multi-step posterior-mean estimate."""
    if sigma_from <= sigma_min:
        return prior.denoise(x, max(sigma_from, sigma_min)).x0_hat
    grid = warped_sigmas(sigma_from, sigma_min, max(int(steps), 1) + 1)
    for i in range(len(grid) - 1):
        s, s_next = grid[i], grid[i + 1]
        d = (x - prior.denoise(x, s).x0_hat) / s
        x_pred = x + (s_next - s) * d
        d2 = (x_pred - prior.denoise(x_pred, s_next).x0_hat) / s_next
        x = x + 0.5 * (s_next - s) * (d + d2)
    return prior.denoise(x, grid[-1]).x0_hat


def partial_reverse(
    prior,
    noisy: np.ndarray,
    sigma_from: float,
    steps: int,
    gen: np.random.Generator,
    sigma_min: float,
    eta: float = 1.0,
) -> np.ndarray:
    """Stochastic reverse chain from a state already at level sigma_from,
    ending on the denoised estimate at the floor."""
    if sigma_from <= sigma_min:
        return prior.denoise(noisy, max(sigma_from, sigma_min)).x0_hat
    grid = warped_sigmas(sigma_from, sigma_min, max(int(steps), 1) + 1)
    x = noisy
    for i in range(len(grid) - 1):
        x0 = prior.denoise(x, grid[i]).x0_hat
        x = ddim_transition(x, x0, grid[i], grid[i + 1], eta, gen)
    return prior.denoise(x, grid[-1]).x0_hat


def init_state(spec, prior, gen: np.random.Generator, sigmas: np.ndarray) -> np.ndarray:
    return sigmas[0] * gen.standard_normal(prior.dim)


def run_streams(spec) -> tuple:
    """(main, auxiliary) generators for one run.

    The auxiliary stream feeds helper draws (perturbations, probes,
    resampling) so that the main trajectory noise stays aligned across
    algorithm variants that differ only in their helpers.
    """
    root = RngStream(spec.seed)
    return root.generator(), root.child(1).generator()
