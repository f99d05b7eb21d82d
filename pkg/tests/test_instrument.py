"""Evaluation-counter semantics for metered models and priors."""
import numpy as np
import pytest

from invprior.instrument import (
    EvalCounters,
    assert_untouched,
    counters_snapshot,
    instrument,
    zero_snapshot,
)
from invprior.ops.base import MatrixModel
from invprior.prior.score import GaussianPrior


def _fixture():
    gen = np.random.default_rng(0)
    model = MatrixModel(gen.standard_normal((4, 8)))
    prior = GaussianPrior.isotropic((1, 8), 1.0)
    return instrument(model, prior)


def test_forward_counts_single_and_batch():
    model, _, c = _fixture()
    z = np.zeros(8)
    y = model.apply(z)
    assert (c.fwd_total, c.fwd_seq) == (1, 1)
    model.apply_batch(np.zeros((5, 8)))
    assert (c.fwd_total, c.fwd_seq) == (6, 2)
    model.misfit_value(z, y)
    model.misfit_value_batch(np.zeros((3, 8)), y)
    assert (c.fwd_total, c.fwd_seq) == (10, 4)
    assert c.fwd_grad_total == 0


def test_gradient_counts_include_forward():
    model, _, c = _fixture()
    z, y = np.zeros(8), np.zeros(4)
    model.misfit(z, y)
    assert (c.fwd_total, c.fwd_seq) == (1, 1)
    assert (c.fwd_grad_total, c.fwd_grad_seq) == (1, 1)
    model.misfit_batch(np.zeros((7, 8)), y)
    assert (c.fwd_total, c.fwd_seq) == (8, 2)
    assert (c.fwd_grad_total, c.fwd_grad_seq) == (8, 2)


def test_denoiser_counts():
    _, prior, c = _fixture()
    x = np.zeros(8)
    prior.denoise(x, 0.5)
    prior.denoise_batch(np.zeros((4, 8)), 0.5)
    prior.denoiser_vjp(x, 0.5, x)
    assert (c.denoise_total, c.denoise_seq) == (5, 2)
    assert (c.denoise_grad_total, c.denoise_grad_seq) == (1, 1)
    # fresh prior draws are not denoiser work
    from invprior.core.rng import RngStream

    prior.sample(RngStream(1))
    assert c.denoise_total == 5


def test_structure_calls_are_free():
    model, _, c = _fixture()
    model.rmatvec(np.zeros(4))
    model.normal_solve(np.zeros(8), 0.1)
    model.pinv_apply(np.zeros(4))
    model.svd_factors()
    assert_untouched(c)
    assert model.capabilities.has_svd
    assert (model.n, model.m) == (8, 4)


def test_runtime_attributed_once_per_call():
    model, _, c = _fixture()
    model.misfit(np.zeros(8), np.zeros(4))
    # one call, one wall-clock interval, even though two counter families
    assert c.runtime_total >= 0.0
    assert c.runtime_seq == pytest.approx(c.runtime_total)
    model.apply_batch(np.zeros((8, 8)))
    assert c.runtime_seq < c.runtime_total or c.runtime_total == 0.0


def test_snapshot_merges_shared_counters_once():
    model, prior, c = _fixture()
    model.apply(np.zeros(8))
    prior.denoise(np.zeros(8), 1.0)
    snap = counters_snapshot(model, prior)
    assert snap["fwd_total"] == 1 and snap["denoise_total"] == 1
    assert set(zero_snapshot()) == set(snap)
    with pytest.raises(AssertionError):
        assert_untouched(c)


def test_counter_validation():
    c = EvalCounters()
    with pytest.raises(ValueError):
        c.add("fwd", 0, 0.0)
    c.add(("fwd", "fwd_grad"), 3, 0.009)
    assert c.fwd_total == 3 and c.fwd_grad_total == 3 and c.fwd_seq == 1
    assert c.total_evaluations() == 6
