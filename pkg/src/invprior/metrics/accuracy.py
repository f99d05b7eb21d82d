"""Image-space accuracy metrics.

Conventions that change absolute numbers and are therefore pinned here:
the PSNR peak is ``max |ref|`` of the reference image (per image, not a
fixed data range), SSIM uses the same per-image peak for its stabilizing
constants, and perfect agreement saturates at the 200 dB cap instead of
returning infinity.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..core.blur import gaussian_blur_array
from ..core.field import Field
from ..errors import UndefinedMetricError

PSNR_CAP_DB = 200.0


def _as_image(x) -> np.ndarray:
    if isinstance(x, Field):
        x = x.values
    arr = np.asarray(x, dtype=np.float64)
    return arr


def _pair(x, ref):
    a, b = _as_image(x), _as_image(ref)
    if a.shape != b.shape:
        raise UndefinedMetricError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(x, ref) -> float:
    """10 log10(peak^2 / MSE) with peak = max|ref|, capped at 200 dB."""
    a, b = _pair(x, ref)
    peak = float(np.max(np.abs(b)))
    if peak == 0.0:
        raise UndefinedMetricError("PSNR undefined for an all-zero reference")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def rel_l2(x, ref) -> float:
    a, b = _pair(x, ref)
    denom = float(np.linalg.norm(b))
    if denom == 0.0:
        raise UndefinedMetricError("relative error undefined for a zero reference")
    return float(np.linalg.norm(a - b)) / denom


def _ssim_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.arange(size) - half
    k = np.exp(-0.5 * (g / sigma) ** 2)
    win = np.outer(k, k)
    return win / win.sum()


def ssim(x, ref) -> float:
    """Windowed structural similarity, 11x11 Gaussian window, sigma 1.5.

    The dynamic range L is max|ref|; C1 = (0.01 L)^2, C2 = (0.03 L)^2.
    """
    a, b = _pair(x, ref)
    if a.ndim != 2:
        a = a.reshape(a.shape[-2], a.shape[-1]) if a.ndim > 2 else np.atleast_2d(a)
        b = b.reshape(b.shape[-2], b.shape[-1]) if b.ndim > 2 else np.atleast_2d(b)
    peak = float(np.max(np.abs(b)))
    if peak == 0.0:
        raise UndefinedMetricError("SSIM undefined for an all-zero reference")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    win = _ssim_window()
    if min(a.shape) < win.shape[0]:
        raise UndefinedMetricError(
            f"image {a.shape} smaller than the {win.shape[0]}x{win.shape[0]} window"
        )

    def filt(img):
        return fftconvolve(img, win, mode="valid")

    mu_a = filt(a)
    mu_b = filt(b)
    mu_aa = filt(a * a) - mu_a * mu_a
    mu_bb = filt(b * b) - mu_b * mu_b
    mu_ab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * mu_ab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (mu_aa + mu_bb + c2)
    return float(np.mean(num / den))


def blur_psnr(x, ref, fwhm: float) -> float:
    """PSNR after blurring both images with the same Gaussian beam."""
    a, b = _pair(x, ref)
    return psnr(gaussian_blur_array(a, fwhm), gaussian_blur_array(b, fwhm))


def measurement_rel_error(model, z_hat, y) -> float:
    """||G(z_hat) - y|| / ||y|| in observation space."""
    y = np.asarray(y, dtype=np.float64)
    denom = float(np.linalg.norm(y))
    if denom == 0.0:
        raise UndefinedMetricError("measurement error undefined for zero data")
    return float(np.linalg.norm(model.apply(np.asarray(z_hat).ravel()) - y)) / denom


def shift_aligned_psnr(x, ref) -> float:
    """Best PSNR over all cyclic shifts of ``x``.

    Cyclic shifts preserve norms, so the MSE-optimal shift maximizes the
    cross-correlation; the FFT locates it and the winning shift is then
    scored exactly.  Always >= plain ``psnr`` because the zero shift is in
    the candidate set.
    """
    a, b = _pair(x, ref)
    if a.ndim != 2:
        raise UndefinedMetricError("shift alignment expects 2-D images")
    # mse(shift) = ||a||^2 + ||b||^2 - 2 corr(shift): maximize correlation
    corr = np.fft.ifft2(np.fft.fft2(a).conj() * np.fft.fft2(b)).real
    dy, dx = np.unravel_index(int(np.argmax(corr)), corr.shape)
    best = psnr(np.roll(a, (dy, dx), axis=(0, 1)), b)
    return max(best, psnr(a, b))
