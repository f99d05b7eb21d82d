"""Behavior contracts for the diffusion-posterior samplers.

Each test pins one qualitative property: exact degenerate equalities,
data-consistency on easy geometries, limiting distributions when one
term is switched off, and the instability escalation paths.  Tolerances
were fixed after a one-time calibration pass against the conjugate
fixtures in _oracle.py.
"""
import numpy as np
import pytest

from invprior.core.rng import RngStream
from invprior.errors import ConfigError, InstabilityError
from invprior.ops.base import MatrixModel
from invprior.prior.score import GaussianPrior
from invprior.solvers import SolverSpec, run_solver, smoothed_gradient
from invprior.solvers.common import (
    ddim_transition,
    reverse_ode,
    scaled_guidance,
    warped_sigmas,
)

from _oracle import PRIOR_MEAN, PRIOR_VAR, SIGMA_Y, linear_fixture, posterior_moments


def _identity_fixture(n=16):
    model = MatrixModel(np.eye(n), name="ident", source_shape=(1, 1, n))
    prior = GaussianPrior.isotropic((1, n), variance=PRIOR_VAR, mean=PRIOR_MEAN)
    truth = prior.sample(RngStream(11))
    y = model.apply(truth) + SIGMA_Y * RngStream(12).generator().standard_normal(n)
    return model, prior, truth, y


def _mean_over_seeds(algorithm, params, model, prior, y, runs):
    total = np.zeros(model.n)
    for seed in range(runs):
        spec = SolverSpec(algorithm=algorithm, seed=seed, params=params)
        total += run_solver(spec, prior, model, y).estimate
    return total / runs


# --------------------------------------------------------------------------
# shared pieces


def test_warped_sigmas_hits_both_endpoints():
    grid = warped_sigmas(80.0, 0.002, 25)
    assert grid.shape == (25,)
    assert grid[0] == pytest.approx(80.0)
    assert grid[-1] == pytest.approx(0.002)
    assert np.all(np.diff(grid) < 0)


def test_ddim_transition_terminal_step_is_noise_free():
    gen = RngStream(0).generator()
    x = gen.standard_normal(8)
    x0 = gen.standard_normal(8)
    out = ddim_transition(x, x0, sigma=0.5, sigma_next=0.0, eta=1.0, gen=gen)
    assert np.array_equal(out, x0)
    out = ddim_transition(x, x0, sigma=0.5, sigma_next=-1e-9, eta=0.3, gen=gen)
    assert np.array_equal(out, x0)


def test_ddim_transition_deterministic_at_eta_zero():
    gen = RngStream(1).generator()
    x = gen.standard_normal(8)
    x0 = np.zeros(8)
    a = ddim_transition(x, x0, 2.0, 1.0, eta=0.0, gen=RngStream(2).generator())
    b = ddim_transition(x, x0, 2.0, 1.0, eta=0.0, gen=RngStream(3).generator())
    # no stochastic component: different generators, same output
    np.testing.assert_allclose(a, b, atol=0)
    np.testing.assert_allclose(a, x0 + (1.0 / 2.0) * (x - x0), atol=1e-14)


def test_scaled_guidance_conventions():
    pull = np.array([3.0, -4.0])
    out = scaled_guidance(pull, misfit_value=8.0, scale=2.0, convention="raw")
    np.testing.assert_allclose(out, 2.0 * pull)
    out = scaled_guidance(pull, misfit_value=8.0, scale=2.0, convention="norm")
    np.testing.assert_allclose(out, 2.0 * pull / 4.0)  # sqrt(2 * 8) = 4
    with pytest.raises(ConfigError):
        scaled_guidance(pull, 1.0, 1.0, convention="banana")


def test_reverse_ode_matches_gaussian_flow():
    # For an isotropic Gaussian prior the probability-flow trajectory has a
    # closed form: the centred state scales like sqrt(c + sigma^2), and the
    # returned value is the denoised endpoint.
    prior = GaussianPrior.isotropic((1, 4), variance=PRIOR_VAR, mean=PRIOR_MEAN)
    x_hi = np.array([5.0, -3.0, 2.0, 0.5])
    hi, lo = 4.0, 0.01
    c = PRIOR_VAR
    x_lo = PRIOR_MEAN + (x_hi - PRIOR_MEAN) * np.sqrt((c + lo**2) / (c + hi**2))
    expected = PRIOR_MEAN + (c / (c + lo**2)) * (x_lo - PRIOR_MEAN)
    got = reverse_ode(prior, x_hi.copy(), sigma_from=hi, steps=60, sigma_min=lo)
    assert np.linalg.norm(got - expected) / np.linalg.norm(expected) < 1e-3


# --------------------------------------------------------------------------
# guidance family


def test_dps_identity_posterior_mean():
    model, prior, _, y = _identity_fixture()
    target, _ = posterior_moments(model, y)
    mean = _mean_over_seeds(
        "dps", dict(num_steps=50, guidance_scale=0.3), model, prior, y, runs=100
    )
    rel = np.linalg.norm(mean - target) / np.linalg.norm(target)
    assert rel < 0.02


@pytest.mark.parametrize("num_steps", [10, 50])
def test_lgd_single_sample_no_jitter_equals_dps(num_steps):
    model, prior, _, y = linear_fixture()
    d = run_solver(
        SolverSpec("dps", seed=4, params=dict(num_steps=num_steps, guidance_scale=1.0)),
        prior, model, y,
    ).estimate
    l = run_solver(
        SolverSpec(
            "lgd", seed=4,
            params=dict(num_steps=num_steps, guidance_scale=1.0,
                        mc_samples=1, perturbation=0.0),
        ),
        prior, model, y,
    ).estimate
    assert np.max(np.abs(d - l)) < 1e-12


def test_forward_smoothed_gradient_aligns_on_quadratic():
    gen = RngStream(300).generator()
    a = gen.standard_normal((32, 64)) / 4.0
    model = MatrixModel(a, name="lin", source_shape=(1, 8, 8))
    z = gen.standard_normal(64)
    y = gen.standard_normal(32)
    g_true = a.T @ (a @ z - y)
    ghat, _ = smoothed_gradient(
        model, z, y, mu=1e-4, probes=4096,
        gen=RngStream(301).generator(), mode="forward",
    )
    cos = g_true @ ghat / (np.linalg.norm(g_true) * np.linalg.norm(ghat))
    assert cos > 0.95


def test_central_smoothed_gradient_unbiased_per_coordinate():
    gen = RngStream(300).generator()
    a = gen.standard_normal((32, 64)) / 4.0
    model = MatrixModel(a, name="lin", source_shape=(1, 8, 8))
    z = gen.standard_normal(64)
    y = gen.standard_normal(32)
    g_true = a.T @ (a @ z - y)
    k = 10_000
    ghat, _ = smoothed_gradient(
        model, z, y, mu=1e-4, probes=k,
        gen=RngStream(302).generator(), mode="central",
    )
    # per-coordinate standard error of the Gaussian-probe average
    se = np.sqrt((g_true @ g_true + g_true**2) / k)
    assert np.all(np.abs(ghat - g_true) <= 3.0 * se)


# --------------------------------------------------------------------------
# projection family


def test_ddnm_identity_returns_observation():
    model, prior, truth, _ = _identity_fixture()
    y = model.apply(truth)
    r = run_solver(
        SolverSpec("ddnm", seed=5, params=dict(num_steps=20, eta=0.9, travel_length=1)),
        prior, model, y,
    )
    assert np.max(np.abs(r.estimate - y)) < 1e-10


def test_ddnm_noiseless_range_consistency():
    model, prior, truth, _ = linear_fixture()
    y = model.apply(truth)  # no measurement noise
    r = run_solver(
        SolverSpec("ddnm", seed=5, params=dict(num_steps=50, eta=0.95, travel_length=1)),
        prior, model, y,
    )
    rel = np.linalg.norm(model.apply(r.estimate) - y) / np.linalg.norm(y)
    assert rel < 1e-8


def test_ddrm_identity_no_noise_returns_observation():
    model, prior, truth, _ = _identity_fixture()
    y = model.apply(truth)
    r = run_solver(
        SolverSpec(
            "ddrm", seed=6,
            params=dict(num_steps=20, eta=0.85, eta_b=1.0, noise_level=0.0),
        ),
        prior, model, y,
    )
    assert np.max(np.abs(r.estimate - y)) < 1e-10


def test_ddrm_null_coordinates_revert_to_prior():
    # Rank-deficient operator: two exactly-dead singular directions.  Their
    # coordinates must centre on the prior mean with substantial spread
    # (nothing pins them to data), while live coordinates track the
    # per-coordinate conjugate posterior.
    gen = RngStream(200).generator()
    u, _ = np.linalg.qr(gen.standard_normal((8, 8)))
    v, _ = np.linalg.qr(gen.standard_normal((8, 8)))
    svals = np.array([2.0, 1.5, 1.0, 0.8, 0.5, 0.3, 0.0, 0.0])
    model = MatrixModel(u @ np.diag(svals) @ v.T, name="rankdef", source_shape=(1, 1, 8))
    prior = GaussianPrior.isotropic((1, 8), variance=PRIOR_VAR, mean=PRIOR_MEAN)
    truth = prior.sample(RngStream(23))
    y = model.apply(truth) + SIGMA_Y * RngStream(24).generator().standard_normal(8)

    params = dict(num_steps=20, eta=0.85, eta_b=1.0, noise_level=SIGMA_Y)
    ests = np.stack(
        [
            run_solver(SolverSpec("ddrm", seed=s, params=params), prior, model, y).estimate
            for s in range(1000)
        ]
    )
    coords = ests @ v
    prior_coord_mean = (np.full(8, PRIOR_MEAN) @ v)

    dead = coords[:, 6:]
    assert np.all(np.abs(dead.mean(axis=0) - prior_coord_mean[6:]) < 0.1)
    # finite-step chains under-disperse; the contract is "not collapsed,
    # not inflated", not exact prior variance
    assert np.all(dead.var(axis=0) > 0.4 * PRIOR_VAR)
    assert np.all(dead.var(axis=0) < 1.5 * PRIOR_VAR)

    ybar = (y @ u)[:6] / svals[:6]
    post = (PRIOR_MEAN / PRIOR_VAR + svals[:6] * ybar / SIGMA_Y**2) / (
        1.0 / PRIOR_VAR + svals[:6] ** 2 / SIGMA_Y**2
    )
    live_dev = np.abs(coords[:, :6].mean(axis=0) - post)
    assert np.all(live_dev < 0.05 * np.abs(post).max())


# --------------------------------------------------------------------------
# splitting family


def test_diffpir_huge_regularizer_reaches_prior():
    # With the data-proximal weight sent to infinity the chain ignores the
    # observation and its per-seed endpoints should reproduce the prior's
    # first two moments.
    model, prior, _, y = _identity_fixture()
    mu = np.full(16, PRIOR_MEAN)
    params = dict(num_steps=200, reg_lambda=1e12, zeta=0.3, noise_level=SIGMA_Y)
    ests = np.stack(
        [
            run_solver(SolverSpec("diffpir", seed=s, params=params), prior, model, y).estimate
            for s in range(300)
        ]
    )
    assert np.linalg.norm(ests.mean(0) - mu) / np.linalg.norm(mu) < 0.05
    assert abs(ests.var(0).mean() - PRIOR_VAR) / PRIOR_VAR < 0.12


def test_diffpir_inner_descent_divergence_raises():
    model, prior, _, y = linear_fixture()
    spec = SolverSpec(
        "diffpir", seed=0,
        params=dict(num_steps=30, reg_lambda=1.0, zeta=0.5, noise_level=SIGMA_Y,
                    force_gradient_prox=True, inner_backtrack=False,
                    inner_lr=1e6, inner_iters=50),
    )
    with pytest.raises(InstabilityError, match="inner descent"):
        run_solver(spec, prior, model, y)


def test_pnpdm_runaway_langevin_step_raises():
    model, prior, _, y = linear_fixture()
    spec = SolverSpec(
        "pnpdm", seed=0,
        params=dict(anneal_steps=30, anneal_sigma_max=10.0, anneal_decay=0.8,
                    langevin_step=0.5, langevin_steps=40, noise_level=SIGMA_Y,
                    prior_steps=10),
    )
    with pytest.raises(InstabilityError, match=r"annealing stage \d+"):
        run_solver(spec, prior, model, y)


def test_daps_runaway_langevin_step_raises():
    model, prior, _, y = linear_fixture()
    spec = SolverSpec(
        "daps", seed=0,
        params=dict(anneal_steps=40, ode_steps=5, langevin_step=0.5,
                    langevin_steps=40, noise_level=SIGMA_Y, step_decay=1.0),
    )
    with pytest.raises(InstabilityError, match=r"noise level \d+"):
        run_solver(spec, prior, model, y)


def test_pnpdm_zero_likelihood_steps_samples_prior():
    model, prior, _, y = _identity_fixture()
    mu = np.full(16, PRIOR_MEAN)
    params = dict(anneal_steps=30, anneal_sigma_max=10.0, anneal_decay=0.8,
                  langevin_step=1e-3, langevin_steps=0, noise_level=SIGMA_Y,
                  prior_steps=40)
    ests = np.stack(
        [
            run_solver(SolverSpec("pnpdm", seed=s, params=params), prior, model, y).estimate
            for s in range(200)
        ]
    )
    assert np.linalg.norm(ests.mean(0) - mu) / np.linalg.norm(mu) < 0.05
    assert abs(ests.var(0).mean() - PRIOR_VAR) / PRIOR_VAR < 0.15


def test_daps_zero_likelihood_steps_samples_prior():
    model, prior, _, y = _identity_fixture()
    mu = np.full(16, PRIOR_MEAN)
    params = dict(anneal_steps=40, ode_steps=5, langevin_step=1.5e-3,
                  langevin_steps=0, noise_level=SIGMA_Y, step_decay=1.0)
    ests = np.stack(
        [
            run_solver(SolverSpec("daps", seed=s, params=params), prior, model, y).estimate
            for s in range(200)
        ]
    )
    assert np.linalg.norm(ests.mean(0) - mu) / np.linalg.norm(mu) < 0.05
    assert abs(ests.var(0).mean() - PRIOR_VAR) / PRIOR_VAR < 0.15


# --------------------------------------------------------------------------
# variational family


def test_reddiff_regularizer_only_flow_reaches_prior_mean():
    model, prior, _, y = _identity_fixture()
    mu = np.full(16, PRIOR_MEAN)
    params = dict(num_steps=6000, lr=3e-4, momentum=0.0, reg_base=9.57,
                  reg_schedule="constant", grad_weight=0.0)
    r = run_solver(SolverSpec("reddiff", seed=0, params=params), prior, model, y)
    assert np.linalg.norm(r.estimate - mu) / np.linalg.norm(mu) < 0.05


def test_reddiff_rejects_unknown_schedule():
    model, prior, _, y = linear_fixture()
    spec = SolverSpec(
        "reddiff", seed=0,
        params=dict(num_steps=10, lr=1e-3, reg_base=1.0, reg_schedule="cubic",
                    grad_weight=1.0),
    )
    with pytest.raises(ConfigError):
        run_solver(spec, prior, model, y)


# --------------------------------------------------------------------------
# particle family


def test_particle_filters_match_identity_posterior_moments():
    model, prior, _, y = _identity_fixture(n=8)
    target, cov = posterior_moments(model, y)
    pv = cov[0, 0]
    for alg in ("fps", "mcgdiff"):
        spec = SolverSpec(
            alg, seed=3,
            params=dict(num_steps=60, particles=256, noise_level=SIGMA_Y, eta=0.9),
        )
        r = run_solver(spec, prior, model, y)
        w = r.info["weights"]
        ens = r.info["ensemble"]
        e_mean = (w[:, None] * ens).sum(0)
        e_var = (w[:, None] * (ens - e_mean) ** 2).sum(0)
        assert np.linalg.norm(e_mean - target) / np.linalg.norm(target) < 0.05, alg
        assert abs(e_var.mean() - pv) / pv < 0.15, alg
        assert abs(w.sum() - 1.0) < 1e-12
        assert not r.info["weight_degeneracy_warning"]


def test_single_particle_filter_flags_degeneracy():
    model, prior, _, y = _identity_fixture(n=8)
    spec = SolverSpec(
        "fps", seed=3, params=dict(num_steps=40, particles=1, noise_level=SIGMA_Y)
    )
    r = run_solver(spec, prior, model, y)
    assert r.info["weight_degeneracy_warning"]
