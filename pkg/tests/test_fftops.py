import numpy as np
import pytest

from invprior.core import RngStream, fft2, ifft2
from invprior.errors import UnsupportedSizeError


def test_delta_transforms_to_constant():
    x = np.zeros((8, 8))
    x[0, 0] = 1.0
    out = fft2(x)
    assert np.allclose(out, 1.0 / 8.0, atol=1e-15)


def test_roundtrip_identity():
    gen = RngStream(3).generator()
    x = gen.standard_normal((16, 16)) + 1j * gen.standard_normal((16, 16))
    assert np.max(np.abs(ifft2(fft2(x)) - x)) < 1e-12


def test_cosine_row_pattern_energy_in_single_mode():
    # oracle: direct DFT summation, no FFT
    nx = ny = 8
    x = np.cos(2 * np.pi * np.arange(nx) / nx)[None, :] * np.ones((ny, 1))
    direct = np.zeros((ny, nx), dtype=complex)
    for ky in range(ny):
        for kx in range(nx):
            phase = np.exp(
                -2j
                * np.pi
                * (
                    np.outer(np.arange(ny) * ky / ny, np.ones(nx))
                    + np.outer(np.ones(ny), np.arange(nx) * kx / nx)
                )
            )
            direct[ky, kx] = (x * phase).sum() / np.sqrt(nx * ny)
    out = fft2(x)
    assert np.max(np.abs(out - direct)) < 1e-12
    mask = np.zeros((ny, nx), dtype=bool)
    mask[0, 1] = mask[0, nx - 1] = True
    assert np.all(np.abs(out[~mask]) < 1e-12)
    assert np.all(np.abs(out[mask]) > 1.0)


def test_parseval_random_fields():
    gen = RngStream(11).generator()
    for _ in range(20):
        x = gen.standard_normal((32, 16))
        assert abs(np.linalg.norm(x) - np.linalg.norm(fft2(x))) < 1e-12 * max(
            1.0, np.linalg.norm(x)
        )


def test_non_power_of_two_rejected():
    with pytest.raises(UnsupportedSizeError, match="not a power of two"):
        fft2(np.zeros((6, 8)))
    with pytest.raises(UnsupportedSizeError):
        ifft2(np.zeros((8, 12)))
