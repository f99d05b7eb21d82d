"""First-Born inverse scattering on a ring of transmitters and receivers.

The unknown is the real permittivity contrast on a square pixel grid.  A
2-D point source on the ring illuminates the sample; the field radiated by
the induced contrast currents is collected at every receiver.  Freezing
the internal field at a reference contrast makes the measurement map a
dense linear operator ``A = H diag(u_tot)`` (one block per transmitter),
which is stored with real and imaginary parts split and stacked so all
downstream algebra is real.

Lengths are in centimetres throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.bessel import hankel1_0, hankel1_1
from ..core.field import Field, complex_field, real_field
from ..core.linalg import SvdFactors, svd
from ..core.rng import as_generator
from ..errors import CapacityError, GeometryError, UndefinedMetricError, UnsupportedSizeError
from .base import MatrixModel

# Largest grid whose stacked dense operator still gets a direct SVD.
MAX_SVD_GRID = 64
_COINCIDENCE_TOL = 1e-9


@dataclass(frozen=True)
class ScatteringSetup:
    """Measurement geometry and physics constants for the ring experiment."""

    n_grid: int = 64
    extent: float = 18.0  # cm, square sample plane
    wavelength: float = 0.84  # cm
    eps_b: float = 1.0
    n_transmitters: int = 20
    ring_radius: float = 160.0  # cm
    n_receivers: int = 360
    noise_sigma: float = 1e-4

    def __post_init__(self):
        if self.n_grid < 2:
            raise UnsupportedSizeError("scattering grid needs at least 2 pixels per side")
        if self.wavelength <= 0 or self.eps_b <= 0 or self.extent <= 0:
            raise ValueError("wavelength, eps_b and extent must be positive")
        if self.n_transmitters < 1 or self.n_receivers < 1:
            raise ValueError("need at least one transmitter and one receiver")

    @property
    def k_b(self) -> float:
        """Background wavenumber sqrt(eps_b)*2*pi/wavelength."""
        return float(np.sqrt(self.eps_b) * 2.0 * np.pi / self.wavelength)

    @property
    def pixel_size(self) -> float:
        return self.extent / self.n_grid

    def pixel_centers(self) -> np.ndarray:
        """(n_grid**2, 2) array of (x, y) pixel centres, row-major in (y, x)."""
        n, h = self.n_grid, self.pixel_size
        coords = -0.5 * self.extent + (np.arange(n) + 0.5) * h
        yy, xx = np.meshgrid(coords, coords, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def _ring_points(self, count: int) -> np.ndarray:
        ang = 2.0 * np.pi * np.arange(count) / count
        return self.ring_radius * np.column_stack([np.cos(ang), np.sin(ang)])

    def transmitter_positions(self) -> np.ndarray:
        return self._ring_points(self.n_transmitters)

    def receiver_positions(self) -> np.ndarray:
        return self._ring_points(self.n_receivers)


def greens_kernel(k: float, dist: np.ndarray) -> np.ndarray:
    """Outgoing 2-D point-source kernel (i/4) * H0^(1)(k * dist)."""
    return 0.25j * hankel1_0(k * np.asarray(dist, dtype=np.float64))


def disc_self_term(k: float, pixel_size: float) -> complex:
    """Integral of the kernel over a disc with the area of one pixel.

    The radial integral has the closed form
    (i*pi*a/(2k)) * H1^(1)(k*a) - 1/k**2 with a = pixel_size/sqrt(pi),
    which stays finite where the pointwise kernel diverges.
    """
    a = pixel_size / np.sqrt(np.pi)
    return complex(0.5j * np.pi * a / k * hankel1_1(np.array(k * a)) - 1.0 / k**2)


def _receiver_matrix(setup: ScatteringSetup) -> np.ndarray:
    pix = setup.pixel_centers()
    recv = setup.receiver_positions()
    d_recv = np.linalg.norm(recv[:, None, :] - pix[None, :, :], axis=2)
    if d_recv.min() < _COINCIDENCE_TOL:
        m_idx, p_idx = np.unravel_index(np.argmin(d_recv), d_recv.shape)
        raise GeometryError(
            f"receiver {m_idx} coincides with pixel {p_idx}; kernel is singular there"
        )
    return greens_kernel(setup.k_b, d_recv) * setup.pixel_size**2


def _domain_matrix(setup: ScatteringSetup) -> np.ndarray:
    pix = setup.pixel_centers()
    k = setup.k_b
    area = setup.pixel_size**2
    n = pix.shape[0]
    g_mat = np.empty((n, n), dtype=np.complex128)
    block = max(1, min(n, 2**22 // max(n, 1)))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d = np.linalg.norm(pix[lo:hi, None, :] - pix[None, :, :], axis=2)
        for i in range(lo, hi):
            d[i - lo, i] = 1.0  # placeholder; diagonal overwritten below
        g_mat[lo:hi] = greens_kernel(k, d) * area
    np.fill_diagonal(g_mat, disc_self_term(k, setup.pixel_size))
    return g_mat


def build_green_matrices(setup: ScatteringSetup):
    """Pixel-to-pixel and pixel-to-receiver propagation matrices.

    Both carry the pixel-area quadrature weight; the diagonal of the
    domain matrix uses the equal-area-disc regularization.  Raises
    GeometryError if a receiver sits on a pixel centre.
    """
    return _domain_matrix(setup), _receiver_matrix(setup)


def incident_fields(setup: ScatteringSetup) -> np.ndarray:
    """(n_transmitters, n_pixels) incident fields, unit amplitude at centre."""
    pix = setup.pixel_centers()
    trans = setup.transmitter_positions()
    k = setup.k_b
    d = np.linalg.norm(trans[:, None, :] - pix[None, :, :], axis=2)
    if d.min() < _COINCIDENCE_TOL:
        raise GeometryError("transmitter coincides with a pixel centre")
    u = greens_kernel(k, d)
    center_amp = np.abs(greens_kernel(k, np.linalg.norm(trans, axis=1)))
    return u / center_amp[:, None]


def total_fields(setup: ScatteringSetup, g_mat: np.ndarray, z_ref: np.ndarray) -> np.ndarray:
    """Internal fields u_in + G(u_in * z_ref) for every transmitter."""
    u_in = incident_fields(setup)
    return u_in + (u_in * z_ref[None, :]) @ g_mat.T


class ScatteringOperator(MatrixModel):
    """Stacked real-embedded first-Born operator for one ring geometry.

    ``z_ref`` fixes the internal field used in ``A = H diag(u_tot)``; the
    default (None) keeps the incident field, i.e. zero reference contrast.
    Rows hold all transmitter/receiver pairs' real parts first, then all
    imaginary parts.
    """

    def __init__(self, setup: ScatteringSetup, z_ref: np.ndarray | Field | None = None):
        self.setup = setup
        n_pix = setup.n_grid**2
        zr = _flat_contrast(z_ref, setup) if z_ref is not None else None
        if zr is None or not np.any(zr):
            u_tot_flat = incident_fields(setup)
            self._z_ref = np.zeros(n_pix)
        else:
            u_tot_flat = total_fields(setup, _domain_matrix(setup), zr)
            self._z_ref = zr
        h_mat = _receiver_matrix(setup)

        blocks = u_tot_flat[:, None, :] * h_mat[None, :, :]  # (T, M, n)
        c = blocks.reshape(-1, n_pix)
        a_real = np.concatenate([c.real, c.imag], axis=0)
        super().__init__(
            a_real,
            name="scattering",
            source_shape=(1, setup.n_grid, setup.n_grid),
        )
        self._svd_max_entries = 2 * setup.n_receivers * setup.n_transmitters * MAX_SVD_GRID**2
        ext = (setup.extent, setup.extent)
        self.u_tot = tuple(
            complex_field(u.reshape(setup.n_grid, setup.n_grid), extent=ext)
            for u in u_tot_flat
        )

    @property
    def z_ref(self) -> np.ndarray:
        return self._z_ref


def _flat_contrast(z, setup: ScatteringSetup) -> np.ndarray:
    if isinstance(z, Field):
        if z.tag != "real":
            raise ValueError("permittivity contrast must be a real field")
        if (z.ny, z.nx) != (setup.n_grid, setup.n_grid):
            raise UnsupportedSizeError(
                f"contrast grid {z.ny}x{z.nx} does not match setup grid "
                f"{setup.n_grid}x{setup.n_grid}"
            )
        return z.values.ravel().astype(np.float64)
    arr = np.asarray(z, dtype=np.float64)
    if arr.size != setup.n_grid**2:
        raise UnsupportedSizeError(
            f"contrast has {arr.size} entries, setup expects {setup.n_grid**2}"
        )
    return arr.reshape(-1)


def forward_scatter(setup: ScatteringSetup, op: ScatteringOperator, z, rng=None) -> np.ndarray:
    """Noisy stacked measurements A z + noise (std noise_sigma per entry)."""
    zf = _flat_contrast(z, setup)
    y = op.apply(zf)
    if setup.noise_sigma > 0:
        y = y + setup.noise_sigma * as_generator(rng).standard_normal(y.shape)
    return y


def precompute_svd(op: ScatteringOperator, reduced_n: int | None = None) -> SvdFactors:
    """SVD of the real-embedded operator, optionally at a coarser grid.

    With ``reduced_n`` the operator is rebuilt at that resolution (the
    reference contrast, if any, is block-averaged down) and factored.
    Grids beyond MAX_SVD_GRID raise CapacityError.
    """
    setup = op.setup
    if reduced_n is None or reduced_n == setup.n_grid:
        if setup.n_grid > MAX_SVD_GRID:
            raise CapacityError(
                f"dense SVD supported up to {MAX_SVD_GRID}x{MAX_SVD_GRID}, "
                f"operator grid is {setup.n_grid}"
            )
        return op.svd_factors()
    if reduced_n > MAX_SVD_GRID:
        raise CapacityError(
            f"dense SVD supported up to {MAX_SVD_GRID}x{MAX_SVD_GRID}, got {reduced_n}"
        )
    if setup.n_grid % reduced_n != 0:
        raise UnsupportedSizeError(
            f"reduced grid {reduced_n} must divide operator grid {setup.n_grid}"
        )
    factor = setup.n_grid // reduced_n
    small = ScatteringSetup(
        n_grid=reduced_n,
        extent=setup.extent,
        wavelength=setup.wavelength,
        eps_b=setup.eps_b,
        n_transmitters=setup.n_transmitters,
        ring_radius=setup.ring_radius,
        n_receivers=setup.n_receivers,
        noise_sigma=setup.noise_sigma,
    )
    zr = op.z_ref.reshape(setup.n_grid, setup.n_grid)
    zr_small = zr.reshape(reduced_n, factor, reduced_n, factor).mean(axis=(1, 3))
    reduced = ScatteringOperator(small, z_ref=zr_small.ravel())
    return reduced.svd_factors()


def measurement_error(op: ScatteringOperator, z_hat, y: np.ndarray) -> float:
    """Relative data residual 100*||A z_hat - y|| / ||y|| in percent."""
    zf = _flat_contrast(z_hat, op.setup)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.m,):
        raise UnsupportedSizeError(f"observation length {y.size} != {op.m}")
    denom = np.linalg.norm(y)
    if denom == 0:
        raise UndefinedMetricError("measurement error undefined for a zero observation")
    return float(100.0 * np.linalg.norm(op.apply(zf) - y) / denom)


def soft_blob_phantom(
    setup: ScatteringSetup,
    rng=None,
    max_blobs: int = 6,
    contrast_range: tuple = (0.05, 0.1),
) -> Field:
    """Random smooth phantom: 1..max_blobs Gaussian bumps, peak in contrast_range."""
    gen = as_generator(rng)
    n, ext = setup.n_grid, setup.extent
    coords = -0.5 * ext + (np.arange(n) + 0.5) * setup.pixel_size
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    img = np.zeros((n, n))
    for _ in range(int(gen.integers(1, max_blobs + 1))):
        cx, cy = gen.uniform(-0.35 * ext, 0.35 * ext, size=2)
        wx, wy = gen.uniform(0.05 * ext, 0.18 * ext, size=2)
        amp = gen.uniform(0.3, 1.0)
        img += amp * np.exp(-0.5 * (((xx - cx) / wx) ** 2 + ((yy - cy) / wy) ** 2))
    peak = gen.uniform(*contrast_range)
    img *= peak / img.max()
    return real_field(img, extent=(ext, ext))
