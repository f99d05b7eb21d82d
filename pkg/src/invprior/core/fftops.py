"""Unitary 2-D FFT helpers.

All spectral code in the package goes through these wrappers so the
normalization convention (1/sqrt(nx*ny) in both directions) is fixed in
exactly one place.  Only power-of-two grids are accepted.
"""
from __future__ import annotations

import numpy as np

from ..errors import UnsupportedSizeError


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_pow2_shape(shape) -> None:
    for n in shape[-2:]:
        if not _is_pow2(int(n)):
            raise UnsupportedSizeError(
                f"grid dimension {n} is not a power of two (shape {tuple(shape)})"
            )


def fft2(x: np.ndarray) -> np.ndarray:
    """Forward unitary 2-D FFT over the last two axes."""
    x = np.asarray(x)
    check_pow2_shape(x.shape)
    return np.fft.fft2(x, norm="ortho")


def ifft2(x: np.ndarray) -> np.ndarray:
    """Inverse unitary 2-D FFT over the last two axes."""
    x = np.asarray(x)
    check_pow2_shape(x.shape)
    return np.fft.ifft2(x, norm="ortho")


def mode_grids(ny: int, nx: int):
    """Integer Fourier mode indices (ky, kx) matching fft2 ordering."""
    ky = np.fft.fftfreq(ny, d=1.0 / ny)
    kx = np.fft.fftfreq(nx, d=1.0 / nx)
    return np.meshgrid(ky, kx, indexing="ij")
