"""Acoustic full-waveform inversion: solver, adjoint gradient, phantoms.

Second-order leapfrog in time, fourth-order in space, free surface on
top (pressure pinned to zero) and quadratic-ramp friction sponges on the
remaining sides.  One marching engine runs both directions: the
transpose direction swaps in the stencil kernel that applies the
Laplacian to v^2 u and exchanges the injection/readout scalings, so the
discrete adjoint is exact to round-off.  Velocity gradients come from
the zero-lag correlation of the back-propagated residual field with the
second time difference of the forward field, reconstructed segment by
segment from periodic checkpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..core.field import Field, real_field
from ..core.rng import as_generator
from ..errors import ConfigError, StabilityError, UnsupportedSizeError
from .base import Capability, ForwardModel

_RIM = 2  # Dirichlet rim required by the 4th-order stencil


@dataclass(frozen=True)
class FwiSetup:
    """Acquisition geometry and discretization for one survey."""

    nx: int = 128
    nz: int = 128
    dx: float = 20.0  # m
    dz: float = 10.0  # m
    dt: float = 0.001  # s
    duration: float = 1.0  # s
    f0: float = 5.0  # Hz, source central frequency
    n_receivers: int = 129
    receiver_depth: int = 1  # grid rows below the free surface
    n_sources: int = 16
    source_depth: int = 127
    nbl: int = 80  # absorbing strip width (points)
    sponge_strength: float = 0.6
    v_min: float = 1500.0
    v_max: float = 4500.0
    store_every: int = 8

    def __post_init__(self):
        if min(self.nx, self.nz) < 8:
            raise UnsupportedSizeError("wave grid needs at least 8 points per side")
        if self.dt <= 0 or self.dx <= 0 or self.dz <= 0 or self.duration <= 0:
            raise ValueError("grid spacings, dt and duration must be positive")
        if not 0 <= self.receiver_depth < self.nz or not 0 <= self.source_depth < self.nz:
            raise ValueError("source/receiver depth outside the grid")
        if self.v_min <= 0 or self.v_max < self.v_min:
            raise ValueError("need 0 < v_min <= v_max")
        if self.n_receivers < 1 or self.n_sources < 1:
            raise ValueError("need at least one source and one receiver")

    @property
    def nt(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    def receiver_columns(self) -> np.ndarray:
        return np.round(np.linspace(0, self.nx - 1, self.n_receivers)).astype(int)

    def source_columns(self) -> np.ndarray:
        return np.round(np.linspace(0, self.nx - 1, self.n_sources)).astype(int)

    def cfl_number(self, v_peak: float) -> float:
        return self.dt * v_peak * math.sqrt(1.0 / self.dx**2 + 1.0 / self.dz**2)

    @property
    def mid_velocity(self) -> float:
        return 0.5 * (self.v_min + self.v_max)

    @property
    def half_range(self) -> float:
        return 0.5 * (self.v_max - self.v_min)

    @classmethod
    def desk(cls, n: int = 16, **overrides) -> "FwiSetup":
        """Scaled-down survey over the same physical extents, CFL <= 0.5."""
        scale = 128 / n
        dx = overrides.pop("dx", 20.0 * scale)
        dz = overrides.pop("dz", 10.0 * scale)
        duration = overrides.pop("duration", 1.0)
        v_max = overrides.get("v_max", 4500.0)
        bound = 0.5 / (v_max * math.sqrt(1.0 / dx**2 + 1.0 / dz**2))
        n_steps = max(1, math.ceil(duration / bound))
        args = dict(
            nx=n,
            nz=n,
            dx=dx,
            dz=dz,
            dt=duration / n_steps,
            duration=duration,
            f0=5.0,
            n_receivers=n + 1,
            receiver_depth=1,
            n_sources=max(2, 16 * n // 128),
            source_depth=n - 1,
            nbl=max(8, 80 * n // 128),
            store_every=8,
        )
        args.update(overrides)
        return cls(**args)


@dataclass(frozen=True)
class VelocityModel:
    v: Field

    def __post_init__(self):
        if self.v.tag != "real":
            raise ValueError("velocity model must be a real field")
        if np.min(self.v.values) <= 0:
            raise ValueError("velocity must be strictly positive")

    @classmethod
    def from_array(cls, arr, extent=None) -> "VelocityModel":
        arr = np.asarray(arr, dtype=np.float64)
        if extent is None:
            extent = (float(arr.shape[0]), float(arr.shape[1]))
        return cls(real_field(arr, extent=extent))

    @property
    def values(self) -> np.ndarray:
        return self.v.values


@dataclass(frozen=True)
class Shot:
    source_index: int
    traces: np.ndarray  # (n_receivers, nt)


def ricker(f0: float, t) -> np.ndarray:
    """Ricker pulse with unit peak at the delay t0 = 1/f0."""
    if f0 <= 0:
        raise ValueError("central frequency must be positive")
    tau = np.asarray(t, dtype=np.float64) - 1.0 / f0
    arg = (np.pi * f0 * tau) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def _model_values(v) -> np.ndarray:
    if isinstance(v, VelocityModel):
        return v.values
    if isinstance(v, Field):
        return v.values
    return np.asarray(v, dtype=np.float64)


def _check_cfl(setup: FwiSetup, v: np.ndarray, allow_violation: bool):
    number = setup.cfl_number(float(np.max(v)))
    if number > 1.0 and not allow_violation:
        raise StabilityError(
            f"time step violates the stability bound: CFL number {number:.3f} > 1; "
            "reduce dt or pass the explicit override to study the blow-up"
        )


def _pad_geometry(setup: FwiSetup):
    top = _RIM
    side = setup.nbl + _RIM
    bottom = setup.nbl + _RIM
    return top, side, bottom


def _interior(setup: FwiSetup):
    top, side, _ = _pad_geometry(setup)
    return slice(top, top + setup.nz), slice(side, side + setup.nx)


def _sponge_profile(setup: FwiSetup) -> np.ndarray:
    """Friction on the padded grid: zero inside, quadratic ramp through
    the strips, scaled so v^2 dt eta stays well below the flip point."""
    top, side, bottom = _pad_geometry(setup)
    nz_p = top + setup.nz + bottom
    nx_p = setup.nx + 2 * side
    cols = np.arange(nx_p)
    rows = np.arange(nz_p)
    ramp = float(side)
    left = np.clip(side - cols, 0, side) / ramp
    right = np.clip(cols - (side + setup.nx - 1), 0, side) / ramp
    below = np.clip(rows - (top + setup.nz - 1), 0, side) / ramp
    xi = np.maximum(left[None, :], right[None, :])
    xi = np.maximum(xi, below[:, None])
    v_ref = 0.5 * (setup.v_min + setup.v_max)
    return setup.sponge_strength * xi**2 / (v_ref**2 * setup.dt)


class _Engine:
    """Shared marching loop for the forward and transpose directions."""

    def __init__(self, setup: FwiSetup, v: np.ndarray, backend: str = "auto"):
        if v.shape != (setup.nz, setup.nx):
            raise UnsupportedSizeError(
                f"velocity shaped {v.shape}, setup expects {(setup.nz, setup.nx)}"
            )
        self.setup = setup
        top, side, bottom = _pad_geometry(setup)
        self.v_pad = np.pad(v, ((top, bottom), (side, side)), mode="edge")
        self.vel2 = np.ascontiguousarray(self.v_pad * self.v_pad)
        self.eta = np.ascontiguousarray(_sponge_profile(setup))
        self.shape = self.vel2.shape
        self.dx2inv = 1.0 / setup.dx**2
        self.dz2inv = 1.0 / setup.dz**2
        mod = kernels.get_backend(backend)
        self._fwd_kernel = mod.step_wave
        self._adj_kernel = mod.step_wave_adjoint
        self._work = np.zeros(self.shape)
        self._surface_row = top  # physical z = 0, pinned to zero
        self.interior = _interior(setup)

    def flat_index(self, row_interior: int, cols_interior) -> np.ndarray:
        top, side, _ = _pad_geometry(self.setup)
        cols = np.atleast_1d(np.asarray(cols_interior, dtype=int))
        return (top + row_interior) * self.shape[1] + (side + cols)

    def grid_index(self) -> np.ndarray:
        top, side, _ = _pad_geometry(self.setup)
        return (
            (top + np.arange(self.setup.nz))[:, None] * self.shape[1]
            + (side + np.arange(self.setup.nx))[None, :]
        ).ravel()

    def march(
        self,
        n_steps: int,
        inj_idx: np.ndarray,
        inj_vals,
        adjoint: bool = False,
        start=None,
        on_frame=None,
        nan_check_every: int = 50,
    ):
        """March n_steps from ``start`` = (two-back, one-back) frames.

        ``inj_vals[k]`` is added while forming the k-th new frame; the
        forward direction scales injections by v^2 dt^2 (the transpose
        readout carries that factor instead).  ``on_frame(k, new, old)``
        sees each freshly formed frame plus its predecessor.  Returns
        the final (two-back, one-back) pair, reusable as ``start``.
        """
        if start is None:
            u_prev = np.zeros(self.shape)
            u_cur = np.zeros(self.shape)
        else:
            u_prev = start[0].copy()
            u_cur = start[1].copy()
        u_next = np.zeros(self.shape)
        dt = self.setup.dt
        probe = (slice(self._surface_row + 1, None, 7), slice(None, None, 7))
        # coincident injection points (e.g. receiver lines denser than the
        # grid) must accumulate, which fancy += silently does not do
        has_dups = inj_idx.size != np.unique(inj_idx).size
        for k in range(n_steps):
            if adjoint:
                self._adj_kernel(u_next, u_cur, u_prev, self.vel2, self.eta, dt,
                                 self.dx2inv, self.dz2inv, self._work)
            else:
                self._fwd_kernel(u_next, u_cur, u_prev, self.vel2, self.eta, dt,
                                 self.dx2inv, self.dz2inv)
            if inj_idx.size:
                vals = inj_vals[k]
                if not adjoint:
                    vals = vals * self.vel2.flat[inj_idx] * (dt * dt)
                if has_dups:
                    np.add.at(u_next.reshape(-1), inj_idx, vals)
                else:
                    u_next.flat[inj_idx] += vals
            u_next[self._surface_row, :] = 0.0
            u_prev, u_cur, u_next = u_cur, u_next, u_prev
            if nan_check_every and (k + 1) % nan_check_every == 0:
                if not np.isfinite(u_cur[probe]).all():
                    raise StabilityError(
                        f"wavefield lost finiteness by step {k + 1} of {n_steps}; "
                        "the run exceeded its stability envelope"
                    )
            if on_frame is not None:
                on_frame(k, u_cur, u_prev)
        if not np.isfinite(u_cur).all():
            raise StabilityError(
                f"wavefield lost finiteness by step {n_steps} of {n_steps}; "
                "the run exceeded its stability envelope"
            )
        return u_prev, u_cur


def solve_wave(
    setup: FwiSetup,
    v,
    source_index: int,
    allow_cfl_violation: bool = False,
    backend: str = "auto",
) -> Shot:
    """Propagate one shot and sample the receiver line."""
    vv = _model_values(v)
    _check_cfl(setup, vv, allow_cfl_violation)
    engine = _Engine(setup, vv, backend)
    nt = setup.nt
    src_col = setup.source_columns()[source_index]
    inj_idx = engine.flat_index(setup.source_depth, [src_col])
    wavelet = ricker(setup.f0, np.arange(nt - 1) * setup.dt)[:, None]
    rec_idx = engine.flat_index(setup.receiver_depth, setup.receiver_columns())
    traces = np.zeros((setup.n_receivers, nt))

    def on_frame(k, u_cur, _):
        traces[:, k + 1] = u_cur.flat[rec_idx]

    engine.march(nt - 1, inj_idx, wavelet, on_frame=on_frame)
    return Shot(source_index=source_index, traces=traces)


def simulate_survey(
    setup: FwiSetup,
    v,
    noise_sigma: float = 0.0,
    rng=None,
    allow_cfl_violation: bool = False,
    backend: str = "auto",
) -> np.ndarray:
    """All shots stacked as (n_sources, n_receivers, nt), plus white noise."""
    data = np.stack(
        [
            solve_wave(setup, v, s, allow_cfl_violation, backend).traces
            for s in range(setup.n_sources)
        ]
    )
    if noise_sigma > 0:
        data = data + noise_sigma * as_generator(rng).standard_normal(data.shape)
    return data


def wave_op_apply(setup: FwiSetup, v, q: np.ndarray, backend: str = "auto") -> np.ndarray:
    """Space-time solution operator: interior source cube (nt-1, nz, nx)
    -> interior fields u_1..u_{nt-1} with the same shape."""
    engine = _Engine(setup, _model_values(v), backend)
    nt = setup.nt
    if q.shape != (nt - 1, setup.nz, setup.nx):
        raise UnsupportedSizeError(
            f"source cube shaped {q.shape}, expected {(nt - 1, setup.nz, setup.nx)}"
        )
    grid_idx = engine.grid_index()
    out = np.zeros_like(q)
    isl = engine.interior

    def on_frame(k, u_cur, _):
        out[k] = u_cur[isl]

    engine.march(nt - 1, grid_idx, q.reshape(nt - 1, -1), on_frame=on_frame)
    return out


def wave_op_adjoint(setup: FwiSetup, v, w: np.ndarray, backend: str = "auto") -> np.ndarray:
    """Transpose of wave_op_apply on the same source/field layout."""
    engine = _Engine(setup, _model_values(v), backend)
    nt = setup.nt
    if w.shape != (nt - 1, setup.nz, setup.nx):
        raise UnsupportedSizeError(
            f"field cotangent shaped {w.shape}, expected {(nt - 1, setup.nz, setup.nx)}"
        )
    grid_idx = engine.grid_index()
    out = np.zeros_like(w)
    isl = engine.interior
    scale = engine.vel2[isl] * setup.dt**2
    w_rev = np.ascontiguousarray(w[::-1].reshape(nt - 1, -1))

    def on_frame(k, u_cur, _):
        # frame k is the transpose field paired with source slot nt-2-k
        out[nt - 2 - k] = u_cur[isl] * scale

    engine.march(nt - 1, grid_idx, w_rev, adjoint=True, on_frame=on_frame)
    return out


def _fold_padding(setup: FwiSetup, g_pad: np.ndarray) -> np.ndarray:
    """Adjoint of edge-replication padding: strip cells fold onto the
    interior cells whose value they replicate."""
    top, side, _ = _pad_geometry(setup)
    rows = np.clip(np.arange(g_pad.shape[0]) - top, 0, setup.nz - 1)
    cols = np.clip(np.arange(g_pad.shape[1]) - side, 0, setup.nx - 1)
    g = np.zeros((setup.nz, setup.nx))
    np.add.at(
        g,
        (
            np.broadcast_to(rows[:, None], g_pad.shape),
            np.broadcast_to(cols[None, :], g_pad.shape),
        ),
        g_pad,
    )
    return g


def adjoint_gradient(
    setup: FwiSetup,
    v,
    observed,
    source_indices=None,
    allow_cfl_violation: bool = False,
    backend: str = "auto",
):
    """Trace misfit 0.5*||sim - obs||^2 over the listed shots and its
    gradient with respect to velocity in m/s, via the adjoint state.

    ``observed`` is a list of Shot or an array (n_sources, n_receivers,
    nt).  The forward field is reconstructed from checkpoint pairs kept
    every ``setup.store_every`` frames; the result does not depend on
    that cadence.
    """
    vv = _model_values(v)
    _check_cfl(setup, vv, allow_cfl_violation)
    if isinstance(observed, (list, tuple)):
        shots = {s.source_index: np.asarray(s.traces, dtype=np.float64) for s in observed}
    else:
        arr = np.asarray(observed, dtype=np.float64)
        shots = {i: arr[i] for i in range(arr.shape[0])}
    if source_indices is None:
        source_indices = sorted(shots)
    engine = _Engine(setup, vv, backend)
    nt = setup.nt
    k_store = max(1, int(setup.store_every))
    rec_idx = engine.flat_index(setup.receiver_depth, setup.receiver_columns())
    src_cols = setup.source_columns()
    wavelet = ricker(setup.f0, np.arange(nt - 1) * setup.dt)[:, None]
    corr = np.zeros(engine.shape)
    misfit = 0.0

    for s in source_indices:
        obs = shots[s]
        if obs.shape != (setup.n_receivers, nt):
            raise UnsupportedSizeError(
                f"observed traces shaped {obs.shape}, expected "
                f"{(setup.n_receivers, nt)}"
            )
        inj_idx = engine.flat_index(setup.source_depth, [src_cols[s]])
        traces = np.zeros((setup.n_receivers, nt))
        zero = np.zeros(engine.shape)
        checkpoints = {0: (zero, zero)}

        def on_forward(k, u_cur, u_prev):
            t = k + 1
            traces[:, t] = u_cur.flat[rec_idx]
            if t % k_store == 0 or t == nt - 1:
                checkpoints[t] = (u_prev.copy(), u_cur.copy())

        engine.march(nt - 1, inj_idx, wavelet, on_frame=on_forward)
        resid = traces - obs
        misfit += 0.5 * float(np.sum(resid * resid))

        # transpose sweep, re-marching each segment to recover the frames
        cps = sorted(checkpoints)
        seg_hi = nt - 1
        adj_state = None
        for seg_lo in reversed(cps[:-1]):
            n_seg = seg_hi - seg_lo
            if n_seg <= 0:
                seg_hi = seg_lo
                continue
            frames = np.empty((n_seg + 2,) + engine.shape)
            frames[0] = checkpoints[seg_lo][0]  # u_{seg_lo - 1}
            frames[1] = checkpoints[seg_lo][1]  # u_{seg_lo}

            def on_resim(k, u_cur, _):
                frames[k + 2] = u_cur

            engine.march(
                n_seg,
                inj_idx,
                wavelet[seg_lo : seg_lo + n_seg],
                start=checkpoints[seg_lo],
                on_frame=on_resim,
            )

            w_block = resid[:, seg_hi:seg_lo:-1].T.copy()  # w_t for t=seg_hi..seg_lo+1

            def on_adjoint(k, u_cur, _):
                # just formed the transpose field for time t = seg_hi - k
                j = n_seg + 1 - k  # frames index of u_t
                d2 = frames[j] - 2.0 * frames[j - 1] + frames[j - 2]
                np.add(corr, u_cur * d2, out=corr)

            adj_state = engine.march(
                n_seg,
                rec_idx,
                w_block,
                adjoint=True,
                start=adj_state,
                on_frame=on_adjoint,
            )
            seg_hi = seg_lo

    g_pad = corr * (2.0 / engine.v_pad)
    grad = _fold_padding(setup, g_pad)
    extent = (setup.nz * setup.dz, setup.nx * setup.dx)
    return misfit, real_field(grad, extent=extent)


def misfit_only(
    setup: FwiSetup,
    v,
    observed,
    allow_cfl_violation: bool = False,
    backend: str = "auto",
) -> float:
    """Trace misfit without the adjoint sweep (forward runs only)."""
    arr = observed
    if isinstance(observed, (list, tuple)):
        arr = np.stack([np.asarray(s.traces) for s in sorted(observed, key=lambda s: s.source_index)])
    arr = np.asarray(arr, dtype=np.float64)
    total = 0.0
    for s in range(setup.n_sources):
        shot = solve_wave(setup, v, s, allow_cfl_violation, backend)
        r = shot.traces - arr[s]
        total += 0.5 * float(np.sum(r * r))
    return total


def layered_fault_model(setup: FwiSetup, rng=None, n_layers: int | None = None) -> VelocityModel:
    """Random subsurface phantom: gently dipping layers with increasing
    speed, cut by one dip-slip fault with a random throw."""
    g = as_generator(rng)
    nz, nx = setup.nz, setup.nx
    if n_layers is None:
        n_layers = int(g.integers(2, 6))
    if n_layers < 2:
        raise ValueError("phantom needs at least two layers")
    span = setup.v_max - setup.v_min
    fracs = np.sort(g.uniform(0.12, 0.88, size=n_layers - 1))
    base = np.linspace(0.0, 1.0, n_layers)
    jitter = g.uniform(-0.25, 0.25, size=n_layers) / max(n_layers - 1, 1)
    levels = setup.v_min + span * np.clip(np.sort(base + jitter), 0.0, 1.0)
    dips = g.uniform(-0.12, 0.12, size=n_layers - 1)
    x_frac = np.arange(nx) / max(nx - 1, 1)
    z_idx = np.arange(nz)[:, None]

    def stack(offset_rows: float) -> np.ndarray:
        model = np.full((nz, nx), levels[0])
        for i, f in enumerate(fracs):
            line = (f + dips[i] * (x_frac - 0.5)) * nz + offset_rows
            model = np.where(z_idx >= line[None, :], levels[i + 1], model)
        return model

    throw = g.uniform(0.05, 0.2) * nz
    x0 = g.uniform(0.3, 0.7) * nx
    slope = g.uniform(-0.5, 0.5)
    right_side = np.arange(nx)[None, :] > (x0 + slope * z_idx)
    model = np.where(right_side, stack(throw), stack(0.0))
    extent = (nz * setup.dz, nx * setup.dx)
    return VelocityModel.from_array(model, extent=extent)


def normalize_velocity(setup: FwiSetup, v) -> np.ndarray:
    return (_model_values(v) - setup.mid_velocity) / setup.half_range


def denormalize_velocity(setup: FwiSetup, z: np.ndarray) -> np.ndarray:
    return setup.mid_velocity + setup.half_range * np.asarray(z, dtype=np.float64)


class FwiOperator(ForwardModel):
    """Surface-survey operator on the normalized velocity square.

    The unknown is the velocity field mapped affinely so [v_min, v_max]
    covers [-1, 1], then flattened.  The mapping is *not* clipped: an
    iterate that wanders far enough outside the physical range raises the
    wave solver's ``StabilityError`` once the CFL bound is violated, which
    is exactly how runaway reconstruction loops surface here.
    ``clamp_range`` advertises the validity square so that denoised
    estimates can be clamped by samplers that honour it.  Observations are
    all shots stacked receiver-major then flattened.
    """

    def __init__(
        self,
        setup: FwiSetup,
        allow_cfl_violation: bool = False,
        backend: str = "auto",
        data_scale: float = 1.0,
    ):
        self.setup = setup
        self.allow_cfl_violation = allow_cfl_violation
        self.backend = backend
        if data_scale <= 0.0:
            raise ConfigError("data_scale must be positive")
        self.data_scale = float(data_scale)
        self.capabilities = Capability(has_gradient=True)
        self.clamp_range = (-1.0, 1.0)
        self.source_shape = (1, setup.nz, setup.nx)
        self._grid_shape = (setup.nz, setup.nx)
        self.n = setup.nz * setup.nx
        self.m = setup.n_sources * setup.n_receivers * setup.nt
        self.name = "surface-survey"
        self.eval_cost = float(setup.n_sources)

    def _velocity(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.size != self.n:
            raise UnsupportedSizeError(f"expected {self.n} unknowns, got {z.size}")
        return denormalize_velocity(self.setup, z.reshape(self._grid_shape))

    def apply(self, z: np.ndarray) -> np.ndarray:
        vel = self._velocity(z)
        data = simulate_survey(
            self.setup, vel, 0.0, None, self.allow_cfl_violation, self.backend
        )
        return data.ravel() / self.data_scale

    def misfit(self, z: np.ndarray, y: np.ndarray):
        # The wave solver works on raw seismograms.  Observations arrive
        # divided by ``data_scale``, so un-scale them, let the adjoint
        # machinery produce the raw-residual value/gradient pair, and fold
        # the scale back in (both pick up a factor 1/scale^2).
        st = self.setup
        s = self.data_scale
        vel = self._velocity(z)
        obs = s * np.asarray(y, dtype=np.float64).reshape(
            st.n_sources, st.n_receivers, st.nt
        )
        value, grad_v = adjoint_gradient(
            st, vel, obs, None, self.allow_cfl_violation, self.backend
        )
        return value / s**2, (grad_v.values * st.half_range).ravel() / s**2

    def misfit_value(self, z: np.ndarray, y: np.ndarray) -> float:
        st = self.setup
        s = self.data_scale
        obs = s * np.asarray(y, dtype=np.float64).reshape(
            st.n_sources, st.n_receivers, st.nt
        )
        value = misfit_only(
            st, self._velocity(z), obs, self.allow_cfl_violation, self.backend
        )
        return value / s**2
