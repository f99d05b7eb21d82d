"""Periodic 2-D incompressible flow in vorticity form.

Pseudo-spectral right-hand side with the 2/3 dealiasing rule, an exact
integrating factor for the viscous part, and a second-order two-stage
step for the rest.  The time step adapts to the advection speed and the
(0,0) mode is pinned, so the spatial mean survives as an exact invariant.
Everything is deterministic for a given input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.fftops import check_pow2_shape, fft2, ifft2, mode_grids
from ..core.grf import sample_grf
from ..core.rng import RngStream, as_generator
from ..errors import ConfigError, InstabilityError, UnsupportedSizeError
from .base import Capability, ForwardModel


@dataclass(frozen=True)
class NsSetup:
    """Solver configuration for the vorticity equation on (0, 2pi)^2."""

    n: int = 128
    viscosity: float = 0.005  # 1/Re
    forcing_amplitude: float = 4.0  # f = -amplitude * cos(mode * x2)
    forcing_mode: int = 4
    dt_max: float = 0.01
    cfl_fraction: float = 0.5

    def __post_init__(self):
        check_pow2_shape((self.n, self.n))
        if self.viscosity < 0:
            raise ConfigError("viscosity must be nonnegative")
        if self.dt_max <= 0 or self.cfl_fraction <= 0:
            raise ConfigError("dt_max and cfl_fraction must be positive")
        if self.forcing_mode < 0 or self.forcing_mode > self.n // 2 - 1:
            raise ConfigError("forcing mode outside the resolvable range")

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.n


class _Spectral:
    """Cached mode grids and the dealiased advection term for one size."""

    def __init__(self, setup: NsSetup):
        n = setup.n
        ka, kb = mode_grids(n, n)  # ka: axis-0 modes (x1), kb: axis-1 (x2)
        self.ka = ka
        self.kb = kb
        self.k2 = ka * ka + kb * kb
        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv
        cut = n // 3
        self.keep = (np.abs(ka) <= cut) & (np.abs(kb) <= cut)
        x2 = 2.0 * np.pi * np.arange(n) / n
        f_phys = -setup.forcing_amplitude * np.cos(setup.forcing_mode * x2)
        self.f_hat = fft2(np.broadcast_to(f_phys, (n, n)).copy())
        self.nu = setup.viscosity

    def velocity(self, w_hat):
        psi = w_hat * self.inv_k2
        u1 = ifft2(1j * self.kb * psi).real
        u2 = ifft2(-1j * self.ka * psi).real
        return u1, u2

    def rhs(self, w_hat):
        """Forcing minus dealiased advection, in spectral space."""
        u1, u2 = self.velocity(w_hat)
        wa = ifft2(1j * self.ka * w_hat).real
        wb = ifft2(1j * self.kb * w_hat).real
        adv = fft2(u1 * wa + u2 * wb)
        return self.f_hat - np.where(self.keep, adv, 0.0), max(
            float(np.max(np.abs(u1))), float(np.max(np.abs(u2)))
        )


def evolve_vorticity(
    setup: NsSetup,
    w0: np.ndarray,
    t_final: float,
    sample_times=None,
):
    """March the vorticity field to t_final.

    Returns the final (n, n) array, or the list of states at the given
    ``sample_times`` (each landed on exactly; the final time is implied).
    """
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (setup.n, setup.n):
        raise UnsupportedSizeError(
            f"vorticity shaped {w0.shape}, setup expects {(setup.n, setup.n)}"
        )
    if t_final < 0:
        raise ConfigError("t_final must be nonnegative")
    marks = []
    if sample_times is not None:
        marks = sorted(float(s) for s in sample_times)
        if marks and (marks[0] < 0 or marks[-1] > t_final):
            raise ConfigError("sample times must lie in [0, t_final]")
    sp = _Spectral(setup)
    w_hat = fft2(w0)
    w_hat[0, 0] = 0.0
    t = 0.0
    out = []
    mark_i = 0
    while mark_i < len(marks) and marks[mark_i] <= t:
        out.append(ifft2(w_hat).real.copy())
        mark_i += 1
    with np.errstate(over="ignore", invalid="ignore"):
        while t < t_final - 1e-14:
            k1, u_max = sp.rhs(w_hat)
            if not np.isfinite(u_max):
                raise InstabilityError(
                    f"vorticity solve lost finiteness at t = {t:.6g}"
                )
            dt = setup.dt_max
            if u_max > 0:
                dt = min(dt, setup.cfl_fraction * setup.dx / u_max)
            next_stop = marks[mark_i] if mark_i < len(marks) else t_final
            dt = min(dt, next_stop - t, t_final - t)
            decay = np.exp(-sp.nu * sp.k2 * dt)
            pred = decay * (w_hat + dt * k1)
            k2_term, _ = sp.rhs(pred)
            w_hat = decay * w_hat + 0.5 * dt * (decay * k1 + k2_term)
            w_hat[0, 0] = 0.0
            t += dt
            while mark_i < len(marks) and t >= marks[mark_i] - 1e-13:
                out.append(ifft2(w_hat).real.copy())
                mark_i += 1
    w_final = ifft2(w_hat).real
    if not np.isfinite(w_final).all():
        raise InstabilityError(f"vorticity solve lost finiteness at t = {t:.6g}")
    if sample_times is not None:
        return out
    return w_final


def ns_observe(w: np.ndarray, stride: int, noise_sigma: float = 0.0, rng=None) -> np.ndarray:
    """Flatten every stride-th grid value, optionally with white noise."""
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[-1]
    if w.shape[-2] != n:
        raise UnsupportedSizeError("observation expects a square field")
    if stride < 1 or n % stride != 0:
        raise ConfigError(f"stride {stride} does not divide the {n}-point grid")
    vals = np.ascontiguousarray(w[..., ::stride, ::stride]).reshape(w.shape[:-2] + (-1,))
    vals = vals.copy()
    if noise_sigma > 0:
        vals = vals + noise_sigma * as_generator(rng).standard_normal(vals.shape)
    return vals


def ns_forward(
    setup: NsSetup,
    w0: np.ndarray,
    horizon: float = 1.0,
    stride: int = 8,
    noise_sigma: float = 0.0,
    rng=None,
) -> np.ndarray:
    """Evolve an initial vorticity and observe the decimated final state."""
    return ns_observe(evolve_vorticity(setup, w0, horizon), stride, noise_sigma, rng)


def generate_ns_dataset(
    count: int,
    seed: int,
    setup: NsSetup | None = None,
    spinup: float = 5.0,
    tau: float = 3.0,
    alpha: float = 4.0,
) -> np.ndarray:
    """Initial-vorticity draws: smooth random fields pushed onto the
    forced attractor by ``spinup`` time units.  Deterministic per seed."""
    if count < 1:
        raise ConfigError("count must be positive")
    setup = setup or NsSetup()
    root = RngStream(seed)
    out = np.empty((count, setup.n, setup.n))
    for i in range(count):
        w_init = sample_grf(setup.n, setup.n, tau, alpha, root.child(i)).values
        out[i] = evolve_vorticity(setup, w_init, spinup)
    return out


class NsOperator(ForwardModel):
    """Initial vorticity -> decimated vorticity one horizon later.

    Black-box nonlinear map: no gradients, no linear structure; samplers
    that need either are rejected before any evaluation happens.
    """

    def __init__(self, setup: NsSetup | None = None, horizon: float = 1.0, stride: int = 8):
        self.setup = setup or NsSetup()
        n = self.setup.n
        if stride < 1 or n % stride != 0:
            raise ConfigError(f"stride {stride} does not divide the {n}-point grid")
        if horizon <= 0:
            raise ConfigError("horizon must be positive")
        self.horizon = float(horizon)
        self.stride = int(stride)
        self.capabilities = Capability()
        self.clamp_range = None
        self.source_shape = (1, n, n)
        self.n = n * n
        self.m = (n // stride) ** 2
        self.name = "vorticity-horizon"

    def apply(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.size != self.n:
            raise UnsupportedSizeError(f"expected {self.n} unknowns, got {z.size}")
        w0 = z.reshape(self.setup.n, self.setup.n)
        return ns_forward(self.setup, w0, self.horizon, self.stride)
