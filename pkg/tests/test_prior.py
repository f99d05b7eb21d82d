import numpy as np
import pytest

from invprior.core import RngStream, fft2
from invprior.prior import (
    GaussianPrior,
    MixturePrior,
    NoiseSchedule,
    discretize_schedule,
    grf_prior,
    sample_unconditional,
)


def test_schedule_linear_warp():
    s = NoiseSchedule(sigma_min=1.0, sigma_max=3.0, num_steps=3, rho=1.0)
    assert np.allclose(discretize_schedule(s), [3.0, 2.0, 1.0])


def test_schedule_single_step():
    s = NoiseSchedule(num_steps=1)
    assert np.array_equal(discretize_schedule(s), [80.0])


def test_schedule_endpoints_exact():
    s = NoiseSchedule(sigma_min=0.002, sigma_max=80.0, num_steps=5, rho=7.0)
    sig = discretize_schedule(s)
    assert sig[0] == 80.0 and sig[-1] == 0.002
    assert np.all(np.diff(sig) < 0)


def test_gaussian_scalar_conjugacy():
    prior = GaussianPrior.isotropic((4, 4), variance=2.0)
    x = RngStream(1).generator().standard_normal(16)
    den = prior.denoise(x, sigma=0.5)
    assert np.allclose(den.x0_hat, (2.0 / 2.25) * x, atol=1e-12)
    den.check(x)


def test_tweedie_limit_small_sigma():
    prior = GaussianPrior.isotropic((8, 8), variance=1.0)
    x = RngStream(2).generator().standard_normal(64)
    den = prior.denoise(x, sigma=1e-6)
    assert np.max(np.abs(den.x0_hat - x)) < 1e-6


def test_denoise_rejects_bad_sigma():
    prior = GaussianPrior.isotropic((4, 4), variance=1.0)
    with pytest.raises(ValueError):
        prior.denoise(np.zeros(16), 0.0)


def test_mixture_symmetric_point():
    prior = MixturePrior([0.5, 0.5], [[-1.0], [1.0]], [0.01, 0.01])
    den = prior.denoise(np.zeros(1), sigma=1.0)
    assert abs(den.x0_hat[0]) < 1e-12
    den.check(np.zeros(1))


def _mixture_quadrature_x0(prior, x, sigma):
    # dense quadrature over the 1-pixel mixture posterior
    grid = np.linspace(-12, 12, 400001)
    log_prior = np.logaddexp.reduce(
        [
            np.log(w) - 0.5 * (grid - m[0]) ** 2 / v - 0.5 * np.log(2 * np.pi * v)
            for w, m, v in zip(prior.weights, prior.means, prior.variances)
        ],
        axis=0,
    )
    log_lik = -0.5 * (x - grid) ** 2 / sigma**2
    w = np.exp(log_prior + log_lik - (log_prior + log_lik).max())
    return float((w * grid).sum() / w.sum())


def test_mixture_matches_quadrature_oracle():
    prior = MixturePrior([0.3, 0.7], [[-1.2], [0.8]], [0.05, 0.3])
    for x, sigma in [(0.4, 0.7), (-2.0, 1.5), (1.0, 0.05), (0.0, 3.0)]:
        got = prior.denoise(np.array([x]), sigma).x0_hat[0]
        ref = _mixture_quadrature_x0(prior, x, sigma)
        assert abs(got - ref) < 1e-8, (x, sigma)


def test_mixture_weights_validated():
    with pytest.raises(ValueError):
        MixturePrior([0.5, 0.6], [[-1.0], [1.0]], [0.1, 0.1])


def test_tweedie_identity_all_kinds():
    gen = RngStream(3).generator()
    priors = [
        GaussianPrior.isotropic((8, 8), 1.7),
        grf_prior(8, 8, 3.0, 4.0),
        MixturePrior([0.2, 0.8], gen.standard_normal((2, 5)), [0.3, 0.9]),
    ]
    for prior in priors:
        x = gen.standard_normal(prior.dim)
        for sigma in (0.01, 0.5, 10.0):
            prior.denoise(x, sigma).check(x)


def test_gaussian_vjp_matches_finite_difference():
    prior = grf_prior(8, 8, 2.0, 2.0)
    gen = RngStream(4).generator()
    x = gen.standard_normal(prior.dim)
    v = gen.standard_normal(prior.dim)
    eps = 1e-6
    jv = (
        prior.denoise(x + eps * v, 0.7).x0_hat - prior.denoise(x - eps * v, 0.7).x0_hat
    ) / (2 * eps)
    # symmetric Jacobian: JVP equals VJP
    assert np.allclose(prior.denoiser_vjp(x, 0.7, v), jv, atol=1e-6)


def test_mixture_vjp_matches_finite_difference():
    gen = RngStream(5).generator()
    prior = MixturePrior([0.4, 0.6], gen.standard_normal((2, 4)), [0.2, 0.5])
    x = gen.standard_normal(4)
    v = gen.standard_normal(4)
    eps = 1e-6
    jv = (
        prior.denoise(x + eps * v, 0.9).x0_hat - prior.denoise(x - eps * v, 0.9).x0_hat
    ) / (2 * eps)
    assert np.allclose(prior.denoiser_vjp(x, 0.9, v), jv, atol=1e-5)


def test_unconditional_gaussian_moments():
    # 10^4 Heun ODE draws from a small gaussian prior reproduce its spectrum
    prior = grf_prior(4, 4, 1.5, 1.5)
    sched = NoiseSchedule(num_steps=40)
    draws = np.empty((10**4, 4, 4), dtype=complex)
    for i in range(10**4):
        x = sample_unconditional(prior, sched, RngStream(60, i))
        draws[i] = fft2(x.reshape(4, 4))
    var = np.mean(np.abs(draws) ** 2, axis=0)
    spec = prior.spectrum
    rel = np.abs(var - spec) / spec
    assert np.max(rel) < 0.05
    mean_err = np.abs(draws.mean(axis=0))
    limit = 3.0 * np.sqrt(spec / 10**4)
    assert np.all(mean_err < 2.0 * limit)


def test_unconditional_single_step_finite():
    prior = GaussianPrior.isotropic((4, 4), 1.0)
    x = sample_unconditional(prior, NoiseSchedule(num_steps=1), RngStream(61))
    assert np.all(np.isfinite(x))


def test_unconditional_mixture_balance():
    prior = MixturePrior([0.5, 0.5], [[-1.0], [1.0]], [0.01, 0.01])
    sched = NoiseSchedule(num_steps=30)
    hits = 0
    n = 10**4
    for i in range(n):
        x = sample_unconditional(prior, sched, RngStream(62, i))
        hits += x[0] > 0
    assert abs(hits / n - 0.5) < 0.02


def test_em_path_runs():
    prior = GaussianPrior.isotropic((4, 4), 1.0)
    x = sample_unconditional(prior, NoiseSchedule(num_steps=25), RngStream(63), "em")
    assert np.all(np.isfinite(x))
