"""Parallel-imaging MRI: coil-weighted Fourier sampling on line masks.

The unknown is a complex image carried as two real channels.  Each coil
multiplies the image by a smooth complex sensitivity profile, takes the
orthonormal 2-D FFT, and keeps the k-space lines selected by an
equispaced mask with a fully sampled centre band.  All sensitivity maps
are synthetic Gaussian-bump profiles normalized so the coil energies sum
to one at every pixel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.fftops import fft2, ifft2
from ..core.field import Field
from ..core.rng import as_generator
from ..errors import UnsupportedSizeError
from .base import Capability, ForwardModel


@dataclass(frozen=True)
class MriSetup:
    ny: int = 64
    nx: int = 64
    n_coils: int = 4
    acceleration: int = 4
    orientation: str = "vertical"
    center_fraction: float = 0.08
    noise_sigma: float = 0.01

    def __post_init__(self):
        if self.acceleration < 1:
            raise ValueError("acceleration must be >= 1")
        if not 0.0 <= self.center_fraction <= 1.0:
            raise ValueError("center_fraction must lie in [0, 1]")
        if self.orientation not in ("vertical", "horizontal"):
            raise ValueError("orientation must be 'vertical' or 'horizontal'")
        if self.n_coils < 1:
            raise ValueError("need at least one coil")


def make_mask(setup: MriSetup, rng=None, random_offset: bool = False) -> np.ndarray:
    """Boolean k-space mask: equispaced lines plus a fully sampled centre band.

    Vertical orientation samples columns; horizontal samples rows (the two
    are transposes on square grids).  The equispaced component has exactly
    ceil(lines/R) lines; the centre band adds round(lines*center_fraction)
    lines, deduplicated.  Deterministic unless random_offset is set.
    """
    lines = setup.nx if setup.orientation == "vertical" else setup.ny
    r = setup.acceleration
    offset = int(as_generator(rng).integers(r)) if random_offset and r > 1 else 0
    sampled = np.zeros(lines, dtype=bool)
    sampled[offset::r] = True
    n_center = int(round(lines * setup.center_fraction))
    start = (lines - n_center) // 2
    sampled[start : start + n_center] = True
    if setup.orientation == "vertical":
        return np.broadcast_to(sampled[None, :], (setup.ny, setup.nx)).copy()
    return np.broadcast_to(sampled[:, None], (setup.ny, setup.nx)).copy()


def synth_coilmaps(setup: MriSetup, rng=None) -> np.ndarray:
    """(J, ny, nx) complex maps: Gaussian bumps at equispaced angles.

    Each coil is a broad magnitude bump centred on a ring around the image
    middle with a gentle linear phase ramp; the stack is normalized
    pixel-wise so sum_j |S_j|^2 = 1 exactly.
    """
    j, ny, nx = setup.n_coils, setup.ny, setup.nx
    yy, xx = np.meshgrid(
        np.linspace(-1.0, 1.0, ny), np.linspace(-1.0, 1.0, nx), indexing="ij"
    )
    maps = np.empty((j, ny, nx), dtype=np.complex128)
    width = 0.9
    ring = 0.5
    for c in range(j):
        ang = 2.0 * np.pi * c / j
        cx, cy = ring * np.cos(ang), ring * np.sin(ang)
        mag = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * width**2))
        phase = 0.5 * (np.cos(ang + 1.0) * xx + np.sin(ang + 1.0) * yy)
        maps[c] = mag * np.exp(1j * phase)
    norm = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return maps / norm[None, :, :]


class MriOperator(ForwardModel):
    """Real-embedded linear operator for one mask/coil-map realization.

    Source layout is (2, ny, nx): real then imaginary channel.  The
    observation stacks the real parts of every coil's sampled k-space
    entries, then all imaginary parts.
    """

    def __init__(self, setup: MriSetup, maps: np.ndarray, mask: np.ndarray):
        maps = np.asarray(maps, dtype=np.complex128)
        mask = np.asarray(mask, dtype=bool)
        if maps.shape != (setup.n_coils, setup.ny, setup.nx):
            raise UnsupportedSizeError(
                f"coil maps shaped {maps.shape}, expected "
                f"{(setup.n_coils, setup.ny, setup.nx)}"
            )
        if mask.shape != (setup.ny, setup.nx):
            raise UnsupportedSizeError(
                f"mask shaped {mask.shape}, expected {(setup.ny, setup.nx)}"
            )
        self.setup = setup
        self.maps = maps
        self.mask = mask
        self._sel = np.flatnonzero(mask.ravel())
        self.name = "mri"
        self.source_shape = (2, setup.ny, setup.nx)
        self.n = 2 * setup.ny * setup.nx
        self.m = 2 * setup.n_coils * self._sel.size
        self.capabilities = Capability(
            is_linear=True, has_svd=False, has_pseudo_inverse=True, has_gradient=True
        )

    # --- complex/real packing -------------------------------------------
    def to_complex(self, z: np.ndarray) -> np.ndarray:
        pair = np.asarray(z, dtype=np.float64).reshape(self.source_shape)
        return pair[0] + 1j * pair[1]

    def from_complex(self, zc: np.ndarray) -> np.ndarray:
        return np.concatenate([zc.real.ravel(), zc.imag.ravel()])

    def magnitude_view(self, z: np.ndarray) -> np.ndarray:
        """|image| on the grid — the convention used for image metrics."""
        return np.abs(self.to_complex(z))

    def _apply_complex(self, zc: np.ndarray) -> np.ndarray:
        ks = fft2(self.maps * zc[None, :, :])
        return ks.reshape(self.setup.n_coils, -1)[:, self._sel]

    def _adjoint_complex(self, w: np.ndarray) -> np.ndarray:
        full = np.zeros((self.setup.n_coils, self.setup.ny * self.setup.nx), dtype=complex)
        full[:, self._sel] = w
        img = ifft2(full.reshape(self.maps.shape))
        return np.sum(np.conj(self.maps) * img, axis=0)

    # --- real-embedded interface ----------------------------------------
    def apply(self, z):
        w = self._apply_complex(self.to_complex(z))
        return np.concatenate([w.real.ravel(), w.imag.ravel()])

    def _unpack_obs(self, y: np.ndarray) -> np.ndarray:
        half = self.m // 2
        flat = np.asarray(y, dtype=np.float64)
        re, im = flat[:half], flat[half:]
        k = self.setup.n_coils
        return (re + 1j * im).reshape(k, -1)

    def rmatvec(self, w):
        zc = self._adjoint_complex(self._unpack_obs(w))
        return self.from_complex(zc)

    def misfit(self, z, y):
        r = self.apply(z) - y
        return 0.5 * float(r @ r), self.rmatvec(r)

    def normal_solve(self, rhs, reg):
        """(A^T A + reg I)^{-1} rhs by conjugate gradients.

        The Gram operator has spectrum in [0, 1] (selection of a unitary
        map with unit-energy coils), so CG converges quickly for reg > 0.
        """
        rhs_c = self.to_complex(rhs)

        def gram(v):
            return self._adjoint_complex(self._apply_complex(v)) + reg * v

        x = np.zeros_like(rhs_c)
        r = rhs_c - gram(x)
        p = r.copy()
        rs = float(np.vdot(r, r).real)
        tol = max(1e-30, 1e-16 * rs)
        for _ in range(500):
            if rs <= tol:
                break
            ap = gram(p)
            alpha = rs / float(np.vdot(p, ap).real)
            x = x + alpha * p
            r = r - alpha * ap
            rs_new = float(np.vdot(r, r).real)
            p = r + (rs_new / rs) * p
            rs = rs_new
        return self.from_complex(x)

    def pinv_apply(self, y):
        return self.normal_solve(self.rmatvec(y), reg=1e-6)


def mri_forward(setup: MriSetup, maps: np.ndarray, mask: np.ndarray, z, rng=None):
    """Per-coil masked k-space with complex Gaussian noise on sampled entries.

    Returns a (J, ny, nx) complex array, zero off the mask.
    """
    if isinstance(z, Field):
        zc = np.asarray(z.data)
    else:
        zc = np.asarray(z, dtype=np.complex128)
    if zc.shape != (setup.ny, setup.nx):
        raise UnsupportedSizeError(
            f"image shaped {zc.shape}, expected {(setup.ny, setup.nx)}"
        )
    ks = fft2(np.asarray(maps) * zc[None, :, :]) * mask[None, :, :]
    if setup.noise_sigma > 0:
        gen = as_generator(rng)
        noise = setup.noise_sigma * (
            gen.standard_normal(ks.shape) + 1j * gen.standard_normal(ks.shape)
        )
        ks = ks + noise * mask[None, :, :]
    return ks


def observation_vector(op: MriOperator, per_coil_kspace: np.ndarray) -> np.ndarray:
    """Flatten a (J, ny, nx) masked k-space stack to the operator's layout."""
    flat = np.asarray(per_coil_kspace).reshape(op.setup.n_coils, -1)[:, op._sel]
    return np.concatenate([flat.real.ravel(), flat.imag.ravel()])
