"""Pure-numpy twin of the compiled wave-step kernel.

Used when the extension is unavailable and as the reference side of the
backend parity tests.
"""
from __future__ import annotations

import numpy as np

C0 = -2.5
C1 = 4.0 / 3.0
C2 = -1.0 / 12.0


def step_wave(u_next, u_cur, u_prev, vel2, eta, dt, dx2inv, dz2inv):
    c = u_cur
    lap = (
        C2 * (c[2:-2, :-4] + c[2:-2, 4:])
        + C1 * (c[2:-2, 1:-3] + c[2:-2, 3:-1])
        + C0 * c[2:-2, 2:-2]
    ) * dx2inv + (
        C2 * (c[:-4, 2:-2] + c[4:, 2:-2])
        + C1 * (c[1:-3, 2:-2] + c[3:-1, 2:-2])
        + C0 * c[2:-2, 2:-2]
    ) * dz2inv
    v2 = vel2[2:-2, 2:-2]
    u_next[2:-2, 2:-2] = (
        2.0 * c[2:-2, 2:-2]
        - u_prev[2:-2, 2:-2]
        + v2 * (dt * dt) * lap
        - v2 * dt * eta[2:-2, 2:-2] * (c[2:-2, 2:-2] - u_prev[2:-2, 2:-2])
    )


def step_wave_adjoint(u_next, u_cur, u_prev, vel2, eta, dt, dx2inv, dz2inv, work):
    np.multiply(vel2, u_cur, out=work)
    s = work
    lap = (
        C2 * (s[2:-2, :-4] + s[2:-2, 4:])
        + C1 * (s[2:-2, 1:-3] + s[2:-2, 3:-1])
        + C0 * s[2:-2, 2:-2]
    ) * dx2inv + (
        C2 * (s[:-4, 2:-2] + s[4:, 2:-2])
        + C1 * (s[1:-3, 2:-2] + s[3:-1, 2:-2])
        + C0 * s[2:-2, 2:-2]
    ) * dz2inv
    v2 = vel2[2:-2, 2:-2]
    u_next[2:-2, 2:-2] = (
        2.0 * u_cur[2:-2, 2:-2]
        - u_prev[2:-2, 2:-2]
        + (dt * dt) * lap
        - v2 * dt * eta[2:-2, 2:-2] * (u_cur[2:-2, 2:-2] - u_prev[2:-2, 2:-2])
    )
