"""Accuracy metrics, folding, and ranking scores."""
import numpy as np
import pytest

from invprior.errors import UndefinedMetricError
from invprior.metrics import (
    blur_psnr,
    chi_tilde,
    measurement_rel_error,
    psnr,
    ranking_score,
    rel_l2,
    shift_aligned_psnr,
    ssim,
)
from invprior.metrics.ranking import mean_ranking_scores
from invprior.metrics.report import MetricReport
from invprior.ops.base import MatrixModel


def test_psnr_reference_points():
    ref = np.ones((8, 8))
    assert psnr(ref, ref) == 200.0
    # MSE equal to the squared peak gives exactly 0 dB
    assert psnr(ref + 1.0, ref) == pytest.approx(0.0, abs=1e-12)
    # peak 1, MSE 1e-3 -> 30 dB
    x = ref + np.sqrt(1e-3)
    assert psnr(x, ref) == pytest.approx(30.0, abs=1e-9)


def test_psnr_guards():
    with pytest.raises(UndefinedMetricError):
        psnr(np.ones((4, 4)), np.zeros((4, 4)))
    with pytest.raises(UndefinedMetricError):
        psnr(np.ones((4, 4)), np.ones((4, 5)))


def test_rel_l2_scale_free():
    gen = np.random.default_rng(0)
    ref = gen.standard_normal((6, 6))
    x = ref + 0.1 * gen.standard_normal((6, 6))
    r = rel_l2(x, ref)
    assert r == pytest.approx(rel_l2(3.0 * x, 3.0 * ref))
    assert rel_l2(ref, ref) == 0.0


def test_ssim_identity_and_anticorrelation():
    gen = np.random.default_rng(1)
    ref = gen.standard_normal((32, 32))
    assert ssim(ref, ref) == pytest.approx(1.0, abs=1e-12)
    # zero local mean everywhere, so sign flip shows up as anticorrelation
    yy, xx = np.meshgrid(np.arange(32), np.arange(32), indexing="ij")
    board = (-1.0) ** (yy + xx)
    assert ssim(-board, board) < 0.0


def test_ssim_near_constant_limit():
    ref = np.full((16, 16), 0.5)
    val = ssim(ref + 1e-6, ref)
    assert val == pytest.approx(1.0, abs=1e-4)
    assert val <= 1.0


def test_chi_tilde_exact_and_symmetric():
    assert chi_tilde(1.0) == 1.0
    assert chi_tilde(0.5) == 2.0
    assert chi_tilde(4.0) == 4.0
    gen = np.random.default_rng(2)
    for c in gen.uniform(0.01, 50.0, size=32):
        assert chi_tilde(c) == pytest.approx(chi_tilde(1.0 / c))
        assert chi_tilde(c) >= 1.0
    with pytest.raises(UndefinedMetricError):
        chi_tilde(0.0)
    with pytest.raises(UndefinedMetricError):
        chi_tilde(-3.0)


def test_ranking_score_endpoints_and_ties():
    # ten distinct values, higher better: best scores 100, worst scores 10
    vals = np.arange(10, dtype=float)
    scores = ranking_score(vals, "higher")
    assert scores[-1] == 100.0
    assert scores[0] == 10.0
    # two-way tie for first place averages ranks 1 and 2
    tied = np.array([9.0, 9.0, 7, 6, 5, 4, 3, 2, 1, 0])
    s = ranking_score(tied, "higher")
    assert s[0] == s[1] == pytest.approx(95.0)
    # lower-better direction flips the ordering
    assert ranking_score(vals, "lower")[0] == 100.0


def test_ranking_score_mean_invariant():
    gen = np.random.default_rng(3)
    for ell in (2, 5, 10):
        vals = gen.integers(0, 4, size=ell).astype(float)  # force ties
        mean = ranking_score(vals, "higher").mean()
        assert mean == pytest.approx(100.0 * (ell + 1) / (2 * ell))


def test_mean_ranking_over_metrics():
    columns = {
        "psnr": {"a": 30.0, "b": 20.0},
        "rel_l2": {"a": 0.1, "b": 0.3},
    }
    out = mean_ranking_scores(columns, {"psnr": "higher", "rel_l2": "lower"})
    assert out["a"] == 100.0 and out["b"] == 50.0


def test_shift_aligned_psnr_realigns_exactly():
    gen = np.random.default_rng(4)
    ref = gen.standard_normal((16, 16))
    shifted = np.roll(ref, (3, 5), axis=(0, 1))
    assert psnr(shifted, ref) < 30.0
    assert shift_aligned_psnr(shifted, ref) == 200.0


def test_shift_aligned_psnr_matches_bruteforce():
    gen = np.random.default_rng(5)
    ref = gen.standard_normal((16, 16))
    x = np.roll(ref, (2, 9), axis=(0, 1)) + 0.3 * gen.standard_normal((16, 16))
    best = max(
        psnr(np.roll(x, (dy, dx), axis=(0, 1)), ref)
        for dy in range(16)
        for dx in range(16)
    )
    got = shift_aligned_psnr(x, ref)
    assert got == pytest.approx(best, abs=1e-9)
    assert got >= psnr(x, ref)


def test_blur_psnr_forgives_high_frequency_error():
    gen = np.random.default_rng(6)
    yy, xx = np.meshgrid(np.arange(32), np.arange(32), indexing="ij")
    ref = np.exp(-((yy - 16.0) ** 2 + (xx - 16.0) ** 2) / 40.0)
    x = ref + 0.05 * gen.standard_normal((32, 32))
    assert blur_psnr(x, ref, fwhm=6.0) > psnr(x, ref) + 3.0


def test_measurement_rel_error_linear_case():
    gen = np.random.default_rng(7)
    model = MatrixModel(gen.standard_normal((5, 9)))
    z = gen.standard_normal(9)
    y = model.apply(z)
    assert measurement_rel_error(model, z, y) == pytest.approx(0.0, abs=1e-12)
    assert measurement_rel_error(model, 0 * z, y) == pytest.approx(1.0)


def test_metric_report_validation():
    rep = MetricReport(psnr=31.0, chi_tilde_cp=1.2, counters={"fwd_total": 3})
    assert rep.metric_dict() == {"psnr": 31.0, "chi_tilde_cp": 1.2}
    round_trip = MetricReport.from_json_dict(rep.to_json_dict())
    assert round_trip == rep
    with pytest.raises(ValueError):
        MetricReport(chi_tilde_cp=0.5)
    with pytest.raises(ValueError):
        MetricReport(counters={"fwd_total": -1})
