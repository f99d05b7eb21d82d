import numpy as np
import pytest

from invprior.core import (
    RngStream,
    fft2,
    gaussian_blur,
    gaussian_blur_array,
    grf_spectrum,
    real_field,
    sample_grf,
)
from invprior.errors import UnsupportedSizeError


def test_stream_reproducible():
    a = RngStream(123, 4).generator().standard_normal(32)
    b = RngStream(123, 4).generator().standard_normal(32)
    assert np.array_equal(a, b)


def test_streams_independent():
    a = RngStream(123, 4).generator().standard_normal(32)
    b = RngStream(123, 5).generator().standard_normal(32)
    assert not np.allclose(a, b)


def test_child_streams_distinct():
    s = RngStream(77)
    ids = {s.child(i).stream_id for i in range(100)}
    assert len(ids) == 100


def test_grf_bit_identical():
    f1 = sample_grf(16, 16, 3.0, 4.0, RngStream(2024, 1))
    f2 = sample_grf(16, 16, 3.0, 4.0, RngStream(2024, 1))
    assert np.array_equal(f1.data, f2.data)


def test_grf_real_and_zero_mean():
    f = sample_grf(32, 32, 3.0, 4.0, RngStream(5))
    assert f.tag == "real"
    assert abs(f.values.mean()) < 1e-14


def test_grf_mode_statistics():
    # variance of integer mode (1,0) follows (|k|^2 + tau^2)^(-alpha)
    n, draws = 16, 10**4
    coeffs = np.empty(draws, dtype=complex)
    means = np.zeros((n, n), dtype=complex)
    for i in range(draws):
        f = sample_grf(n, n, 3.0, 4.0, RngStream(9000, i))
        c = fft2(f.values)
        coeffs[i] = c[0, 1]
        means += c / draws
    target = (1.0 + 9.0) ** -4.0
    var = np.mean(np.abs(coeffs) ** 2)
    assert abs(var - target) / target < 0.05
    # mean coefficient per mode within 3 standard errors
    spec = grf_spectrum(n, n, 3.0, 4.0)
    limit = 3.0 * np.sqrt(spec) / np.sqrt(draws)
    nonzero = spec > 0
    assert np.all(np.abs(means[nonzero]) < np.maximum(limit[nonzero], 1e-12) * 2.5)


def test_grf_rejects_bad_sizes():
    with pytest.raises(UnsupportedSizeError):
        sample_grf(12, 16, 3.0, 4.0, RngStream(1))


def test_blur_constant_unchanged():
    f = real_field(np.full((16, 16), 2.5))
    g = gaussian_blur(f, 4.0)
    assert np.allclose(g.values, 2.5, atol=1e-12)


def test_blur_delta_normalized():
    x = np.zeros((32, 32))
    x[5, 7] = 1.0
    out = gaussian_blur_array(x, 6.0)
    assert abs(out.sum() - 1.0) < 1e-10
    assert out[5, 7] == out.max()


def test_blur_semigroup():
    gen = RngStream(31).generator()
    x = gen.standard_normal((32, 32))
    fw = 5.0
    twice = gaussian_blur_array(gaussian_blur_array(x, fw), fw)
    once = gaussian_blur_array(x, fw * np.sqrt(2.0))
    assert np.max(np.abs(twice - once)) < 1e-8


def test_blur_mass_preserved():
    gen = RngStream(32).generator()
    x = gen.standard_normal((16, 16))
    out = gaussian_blur_array(x, 3.3)
    assert abs(out.sum() - x.sum()) < 1e-10
