"""Sparse-aperture interferometric imaging with closure quantities.

A small synthetic telescope array observes a nonnegative image through
direct nonuniform Fourier sampling on rotating baseline tracks.  Because
station-based gain and phase errors corrupt individual visibilities,
the data products are the corruption-invariant combinations: closure
phases on triangles through a reference station, log closure amplitudes
on a non-redundant quadrangle set, and the total flux.  The likelihood
is the normalized chi-square over those products, with analytically
propagated error bars and an analytic gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.field import Field, real_field
from ..core.rng import RngStream, as_generator
from ..errors import DegenerateVisibilityError, GeometryError, UnsupportedSizeError
from .base import Capability, ForwardModel

_MODULUS_FLOOR = 1e-300


@dataclass(frozen=True)
class ArrayGeometry:
    """Fixed station layout whose baselines rotate rigidly over snapshots."""

    n_stations: int = 8
    n_snapshots: int = 100
    obs_ratio: float = 0.10
    radius: float = 10.0
    layout_seed: int = 20

    def __post_init__(self):
        if self.n_stations < 4:
            raise GeometryError("need at least 4 stations for closure amplitudes")
        if not 0.0 < self.obs_ratio <= 1.0:
            raise ValueError("obs_ratio must lie in (0, 1]")
        if self.n_snapshots < 1:
            raise ValueError("need at least one snapshot")

    def station_positions(self) -> np.ndarray:
        """(M, 2) fixed pseudo-random projected positions."""
        gen = RngStream(self.layout_seed).generator()
        ang = gen.uniform(0.0, 2.0 * np.pi, self.n_stations)
        rad = self.radius * np.sqrt(gen.uniform(0.04, 1.0, self.n_stations))
        return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])

    @property
    def pairs(self) -> list:
        m = self.n_stations
        return [(a, b) for a in range(m) for b in range(a + 1, m)]

    @property
    def n_pairs(self) -> int:
        m = self.n_stations
        return m * (m - 1) // 2

    @property
    def snapshots_used(self) -> int:
        return max(1, int(round(self.obs_ratio * self.n_snapshots)))

    def rotation_angles(self) -> np.ndarray:
        t = np.arange(self.snapshots_used)
        return 2.0 * np.pi * t / self.n_snapshots

    def uv_tracks(self) -> np.ndarray:
        """(T_used, n_pairs, 2) rotated baseline coordinates."""
        pos = self.station_positions()
        base = np.array([pos[a] - pos[b] for a, b in self.pairs])
        ang = self.rotation_angles()
        cos_t, sin_t = np.cos(ang), np.sin(ang)
        rot = np.empty((ang.size, 2, 2))
        rot[:, 0, 0] = cos_t
        rot[:, 0, 1] = -sin_t
        rot[:, 1, 0] = sin_t
        rot[:, 1, 1] = cos_t
        tracks = np.einsum("tij,pj->tpi", rot, base)
        for t in range(tracks.shape[0]):
            d = tracks[t][:, None, :] - tracks[t][None, :, :]
            dist = np.sqrt(np.sum(d * d, axis=2))
            np.fill_diagonal(dist, np.inf)
            if dist.min() < 1e-9:
                raise GeometryError(f"redundant baselines in snapshot {t}")
        return tracks


def _pixel_coords(ny: int, nx: int, extent) -> tuple:
    ey, ex = extent
    rho = -0.5 * ex + (np.arange(nx) + 0.5) * (ex / nx)
    delta = -0.5 * ey + (np.arange(ny) + 0.5) * (ey / ny)
    return rho, delta, (ey / ny) * (ex / nx)


def _as_image(z, shape=None):
    if isinstance(z, Field):
        if z.tag != "real":
            raise ValueError("source image must be real")
        img, extent = z.values, z.extent
    else:
        img, extent = np.asarray(z, dtype=np.float64), (1.0, 1.0)
    if shape is not None and img.shape != shape:
        raise UnsupportedSizeError(f"image shaped {img.shape}, expected {shape}")
    return img, extent


def nudft_matrix(uv: np.ndarray, ny: int, nx: int, extent=(1.0, 1.0)) -> np.ndarray:
    """(n_uv, ny*nx) matrix of exp(-i*2*pi*(u*rho + v*delta)) * pixel area."""
    rho, delta, area = _pixel_coords(ny, nx, extent)
    dd, rr = np.meshgrid(delta, rho, indexing="ij")
    phase = np.outer(uv[:, 0], rr.ravel()) + np.outer(uv[:, 1], dd.ravel())
    return np.exp(-2j * np.pi * phase) * area


def visibilities(geom: ArrayGeometry, z, t: int) -> np.ndarray:
    """Ideal complex visibilities over station pairs for snapshot t."""
    img, extent = _as_image(z)
    uv = geom.uv_tracks()[t]
    mat = nudft_matrix(uv, img.shape[0], img.shape[1], extent)
    return mat @ img.ravel()


def corrupt(
    geom: ArrayGeometry,
    ideal: np.ndarray,
    gains: np.ndarray,
    phases: np.ndarray,
    noise_sigma: float = 0.0,
    rng=None,
) -> np.ndarray:
    """Station-based multiplicative corruption plus complex thermal noise.

    ideal: (T, n_pairs); gains, phases: (T, M) per-station, per-snapshot.
    """
    ideal = np.asarray(ideal, dtype=np.complex128)
    gains = np.asarray(gains, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    if np.any(gains <= 0):
        raise ValueError("station gains must be positive")
    a_idx = np.array([a for a, _ in geom.pairs])
    b_idx = np.array([b for _, b in geom.pairs])
    factor = (
        gains[:, a_idx]
        * gains[:, b_idx]
        * np.exp(-1j * (phases[:, a_idx] - phases[:, b_idx]))
    )
    out = ideal * factor
    if noise_sigma > 0:
        gen = as_generator(rng)
        out = out + noise_sigma * (
            gen.standard_normal(out.shape) + 1j * gen.standard_normal(out.shape)
        )
    return out


class ClosureIndex:
    """Non-redundant triangle and quadrangle index sets for M stations.

    Triangles are anchored at station 0: (0, b, c) for 0 < b < c, giving
    (M-1)(M-2)/2 of them.  Quadrangles (a, b, c, d) denote the amplitude
    ratio |V_ab||V_cd| / (|V_ac||V_bd|); candidates are enumerated over
    sorted 4-subsets in index order (two orientations each) and kept
    greedily while they grow the rank of the log-amplitude design matrix,
    stopping at M(M-3)/2.
    """

    def __init__(self, geom: ArrayGeometry):
        m = geom.n_stations
        self.geom = geom
        pair_index = {p: i for i, p in enumerate(geom.pairs)}

        def pidx(a, b):
            return pair_index[(a, b) if a < b else (b, a)]

        self._pidx = pidx
        self.triangles = [
            (0, b, c) for b in range(1, m) for c in range(b + 1, m)
        ]
        self.tri_pairs = np.array(
            [[pidx(0, b), pidx(b, c), pidx(0, c)] for (_, b, c) in self.triangles]
        )

        target = m * (m - 3) // 2
        basis: list = []
        chosen: list = []
        chosen_rows: list = []
        for combo in _sorted_quadruples(m):
            a, b, c, d = combo
            for quad in ((a, b, c, d), (a, d, b, c)):
                row = np.zeros(geom.n_pairs)
                row[pidx(quad[0], quad[1])] += 1
                row[pidx(quad[2], quad[3])] += 1
                row[pidx(quad[0], quad[2])] -= 1
                row[pidx(quad[1], quad[3])] -= 1
                resid = row.copy()
                for vec in basis:
                    resid -= (resid @ vec) * vec
                norm = np.linalg.norm(resid)
                if norm > 1e-9:
                    basis.append(resid / norm)
                    chosen.append(quad)
                    chosen_rows.append(row)
                if len(chosen) == target:
                    break
            if len(chosen) == target:
                break
        self.quadrangles = chosen
        self.quad_pairs = np.array(
            [
                [pidx(q[0], q[1]), pidx(q[2], q[3]), pidx(q[0], q[2]), pidx(q[1], q[3])]
                for q in chosen
            ]
        )

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_quadrangles(self) -> int:
        return len(self.quadrangles)


def _sorted_quadruples(m: int):
    for a in range(m):
        for b in range(a + 1, m):
            for c in range(b + 1, m):
                for d in range(c + 1, m):
                    yield (a, b, c, d)


def _check_moduli(v: np.ndarray, used: np.ndarray, what: str):
    mods = np.abs(v[:, used.ravel()])
    if mods.min() <= _MODULUS_FLOOR:
        raise DegenerateVisibilityError(
            f"zero-modulus visibility inside a {what}; closure undefined"
        )


def closure_quantities(idx: ClosureIndex, v: np.ndarray):
    """(closure phases, log closure amplitudes) for visibilities (T, n_pairs).

    The phase triple product conjugates the reversed edge so station terms
    cancel; amplitudes pair opposite edges so gains cancel.
    """
    v = np.atleast_2d(np.asarray(v, dtype=np.complex128))
    _check_moduli(v, idx.tri_pairs, "triangle")
    _check_moduli(v, idx.quad_pairs, "quadrangle")
    i, j, l = idx.tri_pairs.T
    bispec = v[:, i] * v[:, j] * np.conj(v[:, l])
    y_cp = np.angle(bispec)
    p, q, r, s = idx.quad_pairs.T
    mods = np.abs(v)
    y_logca = (
        np.log(mods[:, p]) + np.log(mods[:, q]) - np.log(mods[:, r]) - np.log(mods[:, s])
    )
    return y_cp, y_logca


@dataclass(frozen=True)
class BhiObservation:
    y_cp: np.ndarray
    y_logca: np.ndarray
    y_flux: float
    sigma_cp: np.ndarray
    sigma_logca: np.ndarray
    sigma_flux: float

    def __post_init__(self):
        for name in ("y_cp", "y_logca", "sigma_cp", "sigma_logca"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.abs(self.y_cp) > np.pi * (1 + 1e-12)):
            raise ValueError("closure phases must be wrapped to (-pi, pi]")
        if (
            np.any(self.sigma_cp <= 0)
            or np.any(self.sigma_logca <= 0)
            or self.sigma_flux <= 0
        ):
            raise ValueError("noise standard deviations must be positive")

    def packed(self) -> np.ndarray:
        return np.concatenate(
            [self.y_cp.ravel(), self.y_logca.ravel(), [self.y_flux]]
        )


def propagate_sigmas(idx: ClosureIndex, v: np.ndarray, noise_sigma: float):
    """First-order error bars for closure quantities from thermal noise.

    Per-visibility phase and log-amplitude errors are noise_sigma/|V|;
    closure combinations add them in quadrature.
    """
    v = np.atleast_2d(np.asarray(v, dtype=np.complex128))
    inv2 = (noise_sigma / np.abs(v)) ** 2
    i, j, l = idx.tri_pairs.T
    sigma_cp = np.sqrt(inv2[:, i] + inv2[:, j] + inv2[:, l])
    p, q, r, s = idx.quad_pairs.T
    sigma_logca = np.sqrt(inv2[:, p] + inv2[:, q] + inv2[:, r] + inv2[:, s])
    return sigma_cp, sigma_logca


def observe_bhi(
    geom: ArrayGeometry,
    idx: ClosureIndex,
    z,
    rng=None,
    noise_sigma: float = 1e-3,
    gain_log_sigma: float = 0.1,
    sigma_flux: float = 0.01,
) -> BhiObservation:
    """Synthesize a corrupted observation of image z."""
    img, extent = _as_image(z)
    gen = as_generator(rng)
    t_used = geom.snapshots_used
    ideal = np.stack([visibilities(geom, z, t) for t in range(t_used)])
    gains = np.exp(gain_log_sigma * gen.standard_normal((t_used, geom.n_stations)))
    phases = gen.uniform(-np.pi, np.pi, (t_used, geom.n_stations))
    v = corrupt(geom, ideal, gains, phases, noise_sigma, rng=gen)
    y_cp, y_logca = closure_quantities(idx, v)
    sigma_cp, sigma_logca = propagate_sigmas(idx, v, max(noise_sigma, 1e-12))
    _, _, area = _pixel_coords(img.shape[0], img.shape[1], extent)
    flux = float(img.sum() * area)
    return BhiObservation(
        y_cp=y_cp,
        y_logca=y_logca,
        y_flux=flux + sigma_flux * float(gen.standard_normal()),
        sigma_cp=sigma_cp,
        sigma_logca=sigma_logca,
        sigma_flux=sigma_flux,
    )


class BhiOperator(ForwardModel):
    """Closure-domain forward map bound to one observation's error bars."""

    def __init__(
        self,
        geom: ArrayGeometry,
        idx: ClosureIndex,
        obs: BhiObservation,
        ny: int,
        nx: int,
        extent=(1.0, 1.0),
    ):
        self.geom = geom
        self.idx = idx
        self.obs = obs
        self.ny, self.nx = ny, nx
        self.extent = tuple(extent)
        self.name = "blackhole"
        self.source_shape = (1, ny, nx)
        self.n = ny * nx
        t_used = geom.snapshots_used
        self.m = t_used * (idx.n_triangles + idx.n_quadrangles) + 1
        self.capabilities = Capability(has_gradient=True)
        self.clamp_range = (0.0, None)
        tracks = geom.uv_tracks()
        self._fmat = np.concatenate(
            [nudft_matrix(tracks[t], ny, nx, self.extent) for t in range(t_used)]
        )
        self._t_used = t_used
        _, _, self._area = _pixel_coords(ny, nx, self.extent)

    def _vis(self, zf: np.ndarray) -> np.ndarray:
        return (self._fmat @ zf).reshape(self._t_used, self.geom.n_pairs)

    def apply(self, z):
        zf = np.asarray(z, dtype=np.float64).reshape(-1)
        v = self._vis(zf)
        y_cp, y_logca = closure_quantities(self.idx, v)
        flux = float(zf.sum() * self._area)
        return np.concatenate([y_cp.ravel(), y_logca.ravel(), [flux]])

    def loss_from_forward(self, gz, y):
        n_cp = self._t_used * self.idx.n_triangles
        n_ca = self._t_used * self.idx.n_quadrangles
        cp, ca, flux = gz[:n_cp], gz[n_cp : n_cp + n_ca], gz[-1]
        ycp, yca, yflux = y[:n_cp], y[n_cp : n_cp + n_ca], y[-1]
        wrapped = np.angle(np.exp(1j * (cp - ycp)))
        chi_cp = np.mean((wrapped / self.obs.sigma_cp.ravel()) ** 2)
        chi_ca = np.mean(((ca - yca) / self.obs.sigma_logca.ravel()) ** 2)
        chi_flux = ((flux - yflux) / self.obs.sigma_flux) ** 2
        return chi_cp + chi_ca + chi_flux

    def misfit(self, z, y):
        zf = np.asarray(z, dtype=np.float64).reshape(-1)
        v = self._vis(zf)
        y_cp, y_logca = closure_quantities(self.idx, v)
        flux = float(zf.sum() * self._area)

        n_cp = self._t_used * self.idx.n_triangles
        n_ca = self._t_used * self.idx.n_quadrangles
        ycp = y[:n_cp].reshape(y_cp.shape)
        yca = y[n_cp : n_cp + n_ca].reshape(y_logca.shape)
        yflux = float(y[-1])

        wrapped = np.angle(np.exp(1j * (y_cp - ycp)))
        res_ca = y_logca - yca
        res_flux = flux - yflux
        chi_cp = np.mean((wrapped / self.obs.sigma_cp) ** 2)
        chi_ca = np.mean((res_ca / self.obs.sigma_logca) ** 2)
        chi_flux = (res_flux / self.obs.sigma_flux) ** 2
        value = float(chi_cp + chi_ca + chi_flux)

        # complex per-visibility coefficients c = a + i*b, consumed through
        # Im(c*x) = a*Im(x) + b*Re(x): the real part weights angle
        # derivatives Im(F/V), the imaginary part weights log-modulus
        # derivatives Re(F/V)
        coef = np.zeros((self._t_used, self.geom.n_pairs), dtype=np.complex128)
        w_cp = (2.0 / wrapped.size) * wrapped / self.obs.sigma_cp**2
        i, j, l = self.idx.tri_pairs.T
        np.add.at(coef, (slice(None), i), w_cp)
        np.add.at(coef, (slice(None), j), w_cp)
        np.add.at(coef, (slice(None), l), -w_cp)
        w_ca = (2.0 / res_ca.size) * res_ca / self.obs.sigma_logca**2
        p, q, r, s = self.idx.quad_pairs.T
        np.add.at(coef, (slice(None), p), 1j * w_ca)
        np.add.at(coef, (slice(None), q), 1j * w_ca)
        np.add.at(coef, (slice(None), r), -1j * w_ca)
        np.add.at(coef, (slice(None), s), -1j * w_ca)

        ratio = (coef / v).ravel()
        grad = (ratio @ self._fmat).imag.copy()
        grad += 2.0 * res_flux / self.obs.sigma_flux**2 * self._area
        return value, grad


def chi2_likelihood(obs: BhiObservation, geom: ArrayGeometry, idx: ClosureIndex, z):
    """(value, gradient Field) of the closure-domain chi-square at image z."""
    img, extent = _as_image(z)
    op = BhiOperator(geom, idx, obs, img.shape[0], img.shape[1], extent)
    value, grad = op.misfit(img.ravel(), obs.packed())
    return value, real_field(grad.reshape(img.shape), extent=extent)
