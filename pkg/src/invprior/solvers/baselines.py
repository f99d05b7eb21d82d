"""Classical reconstruction baselines.

Three reference methods without a learned prior: accelerated proximal
descent with a total-variation penalty for linear operators, an ensemble
Kalman iteration for black-box operators, and plain momentum descent for
differentiable ones.  They share the solver calling convention and the
evaluation counters so they can sit in the same comparison tables.
"""
from __future__ import annotations

import numpy as np

from ..core.blur import gaussian_blur_array
from ..core.rng import RngStream
from ..errors import ConfigError, InstabilityError, StabilityError

_FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


# ---------------------------------------------------------------------------
# total variation


def tv_value(image: np.ndarray) -> float:
    """Isotropic total variation with symmetric (edge-clamped) differences."""
    gy = np.diff(image, axis=0, append=image[-1:, :])
    gx = np.diff(image, axis=1, append=image[:, -1:])
    return float(np.sum(np.sqrt(gy * gy + gx * gx)))


def _tv_div(p, q):
    # divergence paired with the clamped forward differences: the last
    # row/column of the dual field is structurally zero, so <div(p,q), u>
    # equals -<(p,q), grad u> exactly
    div = np.zeros_like(p)
    div[:-1, :] += p[:-1, :]
    div[1:, :] -= p[:-1, :]
    div[:, :-1] += q[:, :-1]
    div[:, 1:] -= q[:, :-1]
    return div


def tv_prox(image: np.ndarray, weight: float, iters: int = 20) -> np.ndarray:
    """Proximal map of weight * TV via projected dual gradient steps."""
    if weight <= 0:
        return image.copy()
    p = np.zeros_like(image)
    q = np.zeros_like(image)
    step = 0.124  # < 1/8, the proven dual-step bound for this stencil
    for _ in range(int(iters)):
        u = image - weight * _tv_div(p, q)
        gy = np.diff(u, axis=0, append=u[-1:, :])
        gx = np.diff(u, axis=1, append=u[:, -1:])
        p_new = p - (step / weight) * gy
        q_new = q - (step / weight) * gx
        mag = np.maximum(1.0, np.sqrt(p_new * p_new + q_new * q_new))
        p, q = p_new / mag, q_new / mag
    return image - weight * _tv_div(p, q)


def _shape_2d(model) -> tuple[int, int]:
    shape = model.source_shape
    if len(shape) == 3:
        return shape[1], shape[2]
    if len(shape) == 2:
        return shape
    raise ConfigError(f"fista_tv needs a 2-d source grid, got {shape}")


def run_fista_tv(spec, model, y, info=None):
    """Accelerated proximal descent on data fit + TV.

    The smooth step uses 1/L with L the squared top singular value; a
    monotone safeguard keeps the objective non-increasing (restarting the
    momentum whenever a step would increase it).
    """
    if not model.capabilities.is_linear:
        raise ConfigError("fista_tv requires a linear forward operator")
    weight = float(spec.require("tv_weight"))
    iters = int(spec.get("iters", 300))
    inner = int(spec.get("inner_iters", 20))
    ny, nx = _shape_2d(model)
    channels = int(np.prod(model.source_shape)) // (ny * nx)

    s_max = float(np.max(model.svd_factors().singular_values))
    lip = max(s_max * s_max, 1e-30)

    def objective(zz):
        value = model.misfit_value(zz, y)
        tv = sum(
            tv_value(img) for img in zz.reshape(channels, ny, nx)
        )
        return value + weight * tv

    def prox(zz, w):
        imgs = zz.reshape(channels, ny, nx)
        return np.stack(
            [tv_prox(img, w, inner) for img in imgs]
        ).reshape(-1)

    z = np.zeros(model.n)
    z_prev = z.copy()
    t = 1.0
    best = z.copy()
    best_obj = objective(z)
    objectives = [best_obj]
    for _ in range(iters):
        momentum_point = z + ((t - 1.0) / (t + 1.0)) * (z - z_prev)
        _, grad = model.misfit(momentum_point, y)
        candidate = prox(momentum_point - grad / lip, weight / lip)
        cand_obj = objective(candidate)
        if cand_obj > best_obj:
            # monotone restart: re-take the step from the best point
            _, grad = model.misfit(best, y)
            candidate = prox(best - grad / lip, weight / lip)
            cand_obj = objective(candidate)
            t = 1.0
        z_prev = z
        z = candidate
        t = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if cand_obj <= best_obj:
            best, best_obj = candidate, cand_obj
        objectives.append(best_obj)
    if info is not None:
        info["objectives"] = np.array(objectives)
    deltas = np.diff(np.array(objectives))
    assert (deltas <= 1e-9 * max(1.0, abs(objectives[0]))).all(), (
        "objective increased during a monotone descent"
    )
    return best


# ---------------------------------------------------------------------------
# ensemble Kalman iteration


def run_eki(spec, prior, model, y, info=None):
    """Stochastic ensemble Kalman inversion.

    Runs a fixed number of steps; the inflation factor alpha_k follows
    the usual misfit-based adaptive rule, additionally capped so the
    cumulative 1/alpha budget reaches one by the end of the run.  Every
    step perturbs the data per particle and shifts the ensemble through
    the cross-covariance; an ill-conditioned ensemble covariance gets a
    jittered retry (recorded in the run report).
    """
    particles = int(spec.require("particles"))
    steps = int(spec.require("steps"))
    sigma_y = abs(float(spec.get("noise_level", 0.1)))
    noise_floor = float(spec.get("noise_floor", 1e-8))
    gamma = max(sigma_y * sigma_y, noise_floor)
    if particles < 2:
        raise ConfigError("eki needs at least two particles")

    root = RngStream(spec.seed)
    gen = root.generator()
    ensemble = np.stack(
        [prior.sample(root.child(j + 1)) for j in range(particles)]
    )
    m = y.size
    budget = 1.0
    jitter_retries = 0
    spreads = []

    for k in range(steps):
        preds = model.apply_batch(ensemble)
        resid = y[None, :] - preds
        misfits = 0.5 * np.sum(resid * resid, axis=1) / max(gamma, 1e-300)
        phi = float(np.mean(misfits))
        # adaptive inflation, spent against the remaining budget
        inv_alpha = min(max(m / (2.0 * phi), 1e-8), 1.0) if phi > 0 else 1.0
        if budget > 0:
            inv_alpha = min(inv_alpha, budget)
            budget -= inv_alpha
        alpha = 1.0 / inv_alpha
        z_mean = ensemble.mean(axis=0)
        g_mean = preds.mean(axis=0)
        dz = ensemble - z_mean
        dg = preds - g_mean
        c_yy = dg.T @ dg / (particles - 1)
        c_zy = dz.T @ dg / (particles - 1)
        noise = np.sqrt(alpha * gamma) * gen.standard_normal(preds.shape)
        rhs = (y[None, :] + noise - preds).T
        mat = c_yy + alpha * gamma * np.eye(m)
        try:
            gain = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError:
            jitter_retries += 1
            jitter = 1e-8 * max(float(np.trace(mat)) / m, 1e-8)
            gain = np.linalg.solve(mat + jitter * np.eye(m), rhs)
        ensemble = ensemble + (c_zy @ gain).T
        spreads.append(float(np.mean(np.sum(dz * dz, axis=1))))
        if not np.all(np.isfinite(ensemble)):
            raise InstabilityError(f"eki: ensemble diverged at step {k}")

    if info is not None:
        info["jitter_retries"] = jitter_retries
        info["ensemble_spread"] = np.array(spreads)
        info["ensemble"] = ensemble
    return ensemble.mean(axis=0)


# ---------------------------------------------------------------------------
# momentum descent


def blurred_init(truth: np.ndarray, shape, blur_sigma: float = 20.0) -> np.ndarray:
    """Heavily blurred version of a reference image, the standard warm
    start for a local optimizer (only large-scale structure survives)."""
    img = np.asarray(truth, dtype=np.float64).reshape(shape)
    fwhm = _FWHM_PER_SIGMA * blur_sigma
    if img.ndim == 2:
        return gaussian_blur_array(img, fwhm).reshape(-1)
    return np.stack(
        [gaussian_blur_array(ch, fwhm) for ch in img]
    ).reshape(-1)


def run_gd(spec, model, y, info=None, init=None):
    """Momentum gradient descent on the data misfit."""
    if not model.capabilities.has_gradient:
        raise ConfigError("gd requires a forward operator with a gradient")
    lr = float(spec.require("lr"))
    momentum = float(spec.get("momentum", 0.9))
    iters = int(spec.get("iters", 300))
    decay = float(spec.get("lr_decay", 1.0))

    z = np.zeros(model.n) if init is None else np.asarray(init, dtype=np.float64).copy()
    velocity = np.zeros_like(z)
    values = []
    for k in range(iters):
        try:
            value, grad = model.misfit(z, y)
        except StabilityError as exc:
            raise InstabilityError(
                f"gd: solver diverged at iteration {k}: {exc}"
            ) from exc
        values.append(value)
        velocity = momentum * velocity - lr * decay**k * grad
        z = z + velocity
        if not np.all(np.isfinite(z)):
            raise InstabilityError(
                f"gd: solver diverged at iteration {k} "
                f"(step norm {float(np.linalg.norm(velocity)):.3g})"
            )
    if info is not None:
        info["misfits"] = np.array(values)
    return z
