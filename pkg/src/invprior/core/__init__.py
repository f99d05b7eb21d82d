from .bessel import bessel_j0, bessel_j1, bessel_y0, bessel_y1, hankel1_0, hankel1_1
from .blur import gaussian_blur, gaussian_blur_array
from .fftops import fft2, ifft2, mode_grids
from .field import Field, complex_field, real_field
from .grf import grf_spectrum, sample_grf, sample_grf_batch
from .linalg import SvdFactors, svd
from .rng import RngStream

__all__ = [
    "Field",
    "RngStream",
    "SvdFactors",
    "bessel_j0",
    "bessel_j1",
    "bessel_y0",
    "bessel_y1",
    "complex_field",
    "fft2",
    "gaussian_blur",
    "gaussian_blur_array",
    "grf_spectrum",
    "hankel1_0",
    "hankel1_1",
    "ifft2",
    "mode_grids",
    "real_field",
    "sample_grf",
    "sample_grf_batch",
    "svd",
]
