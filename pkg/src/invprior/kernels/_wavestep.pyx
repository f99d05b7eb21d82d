# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-step kernel for the acoustic wave simulator.

Fourth-order spatial stencil, second-order leapfrog in time, with a
spatially varying friction coefficient for the absorbing strips.  The
outer two-point rim of the grid is Dirichlet (left untouched, assumed
zero).  A pure-numpy twin lives in ``wavestep_np``; the two must agree to
rounding.
"""

import numpy as np

cimport numpy as cnp

C0 = -2.5
C1 = 4.0 / 3.0
C2 = -1.0 / 12.0


def step_wave(double[:, ::1] u_next, double[:, ::1] u_cur, double[:, ::1] u_prev,
              double[:, ::1] vel2, double[:, ::1] eta,
              double dt, double dx2inv, double dz2inv):
    """u_next <- 2 u_cur - u_prev + v^2 dt^2 Lap4(u_cur) - v^2 dt eta (u_cur - u_prev)."""
    cdef Py_ssize_t nz = u_cur.shape[0]
    cdef Py_ssize_t nx = u_cur.shape[1]
    cdef Py_ssize_t i, j
    cdef double lap, dt2 = dt * dt
    cdef double c0 = -2.5, c1 = 4.0 / 3.0, c2 = -1.0 / 12.0
    for i in range(2, nz - 2):
        for j in range(2, nx - 2):
            lap = (c2 * (u_cur[i, j - 2] + u_cur[i, j + 2])
                   + c1 * (u_cur[i, j - 1] + u_cur[i, j + 1])
                   + c0 * u_cur[i, j]) * dx2inv \
                + (c2 * (u_cur[i - 2, j] + u_cur[i + 2, j])
                   + c1 * (u_cur[i - 1, j] + u_cur[i + 1, j])
                   + c0 * u_cur[i, j]) * dz2inv
            u_next[i, j] = (2.0 * u_cur[i, j] - u_prev[i, j]
                            + vel2[i, j] * dt2 * lap
                            - vel2[i, j] * dt * eta[i, j] * (u_cur[i, j] - u_prev[i, j]))


def step_wave_adjoint(double[:, ::1] u_next, double[:, ::1] u_cur,
                      double[:, ::1] u_prev, double[:, ::1] vel2,
                      double[:, ::1] eta, double dt, double dx2inv,
                      double dz2inv, double[:, ::1] work):
    """Transpose-direction step: the stencil acts on v^2 u instead of u.

    u_next <- 2 u_cur - u_prev + dt^2 Lap4(v^2 u_cur)
              - v^2 dt eta (u_cur - u_prev).
    ``work`` is caller-provided scratch with the grid shape.
    """
    cdef Py_ssize_t nz = u_cur.shape[0]
    cdef Py_ssize_t nx = u_cur.shape[1]
    cdef Py_ssize_t i, j
    cdef double lap, dt2 = dt * dt
    cdef double c0 = -2.5, c1 = 4.0 / 3.0, c2 = -1.0 / 12.0
    for i in range(nz):
        for j in range(nx):
            work[i, j] = vel2[i, j] * u_cur[i, j]
    for i in range(2, nz - 2):
        for j in range(2, nx - 2):
            lap = (c2 * (work[i, j - 2] + work[i, j + 2])
                   + c1 * (work[i, j - 1] + work[i, j + 1])
                   + c0 * work[i, j]) * dx2inv \
                + (c2 * (work[i - 2, j] + work[i + 2, j])
                   + c1 * (work[i - 1, j] + work[i + 1, j])
                   + c0 * work[i, j]) * dz2inv
            u_next[i, j] = (2.0 * u_cur[i, j] - u_prev[i, j]
                            + dt2 * lap
                            - vel2[i, j] * dt * eta[i, j] * (u_cur[i, j] - u_prev[i, j]))
