"""Stationary Gaussian random fields on the periodic grid.

Sampling is spectral: unit complex normal coefficients are scaled by the
square root of the target spectrum (|k|^2 + tau^2)^(-alpha) and symmetrized
so the inverse transform is exactly real.  The (0,0) mode is zeroed, which
pins the spatial mean of every draw to zero.  Convention: the *unitary* FFT
coefficient at integer mode k has variance equal to the spectrum value.
"""
from __future__ import annotations

import numpy as np

from .fftops import check_pow2_shape, ifft2, mode_grids
from .field import Field, real_field
from .rng import RngStream


def grf_spectrum(ny: int, nx: int, tau: float, alpha: float) -> np.ndarray:
    """Per-mode variance of the unitary-FFT coefficients, (0,0) mode zeroed."""
    ky, kx = mode_grids(ny, nx)
    spec = (kx * kx + ky * ky + tau * tau) ** (-alpha)
    spec[0, 0] = 0.0
    return spec


def hermitize(coeff: np.ndarray) -> np.ndarray:
    """Project complex coefficients onto the Hermitian-symmetric subspace,
    preserving per-mode variance for unit complex normal input."""
    flipped = np.conj(np.roll(np.flip(coeff, axis=(0, 1)), shift=(1, 1), axis=(0, 1)))
    return (coeff + flipped) / np.sqrt(2.0)


def sample_grf(nx: int, ny: int, tau: float, alpha: float, rng: RngStream) -> Field:
    """One draw from N(0, (-Laplacian + tau^2 I)^(-alpha)) on the torus."""
    if tau <= 0 or alpha <= 1:
        raise ValueError("sample_grf requires tau > 0 and alpha > 1")
    check_pow2_shape((ny, nx))
    gen = rng.generator()
    coeff = gen.standard_normal((ny, nx)) + 1j * gen.standard_normal((ny, nx))
    coeff /= np.sqrt(2.0)  # unit-variance complex normals
    coeff = hermitize(coeff)
    spec = grf_spectrum(ny, nx, tau, alpha)
    sample = ifft2(coeff * np.sqrt(spec)).real
    return real_field(sample)


def sample_grf_batch(
    count: int, nx: int, ny: int, tau: float, alpha: float, rng: RngStream
) -> np.ndarray:
    """Stacked draws, shape (count, ny, nx), one child stream per draw."""
    out = np.empty((count, ny, nx))
    for i in range(count):
        out[i] = sample_grf(nx, ny, tau, alpha, rng.child(i)).values
    return out
