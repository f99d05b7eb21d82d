"""Gaussian blur with periodic boundary, used by the blurred-image score.

The kernel width is given as full width at half maximum in pixels;
sigma = fwhm / 2.355.  The blur is applied as the Gaussian transfer
function exp(-2 pi^2 sigma^2 |f|^2) in Fourier space, i.e. circular
convolution with the normalized periodic Gaussian kernel; the DC response
is exactly 1, so pixel mass is preserved, and widths compose exactly
(fwhm then fwhm equals fwhm*sqrt(2) once).
"""
from __future__ import annotations

import numpy as np

from .fftops import fft2, ifft2, mode_grids
from .field import Field

FWHM_TO_SIGMA = 1.0 / 2.355


def blur_multiplier(ny: int, nx: int, fwhm: float) -> np.ndarray:
    """Fourier response of the blur on an ny-by-nx periodic grid."""
    if fwhm <= 0:
        raise ValueError("gaussian_blur requires fwhm > 0")
    sigma = fwhm * FWHM_TO_SIGMA
    ky, kx = mode_grids(ny, nx)
    f2 = (kx / nx) ** 2 + (ky / ny) ** 2  # cycles per pixel, squared
    return np.exp(-2.0 * np.pi**2 * sigma**2 * f2)


def gaussian_blur_array(values: np.ndarray, fwhm: float) -> np.ndarray:
    values = np.asarray(values)
    mult = blur_multiplier(values.shape[-2], values.shape[-1], fwhm)
    out = ifft2(fft2(values) * mult)
    if np.isrealobj(values):
        return out.real
    return out


def gaussian_blur(f: Field, fwhm: float) -> Field:
    return f.with_data(gaussian_blur_array(f.values, fwhm))
