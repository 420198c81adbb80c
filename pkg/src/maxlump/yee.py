"""Hand-coded staggered-grid finite difference reference scheme.

This module is an independent oracle: it never touches the mesh or
finite element machinery.  Fields live on the classical staggered
layout over an nx-by-ny cell grid with spacings hx, hy:

    hz[i, j]  cell centers,            shape (nx, ny)
    ex[i, j]  horizontal edge j-lines, shape (nx, ny + 1)
    ey[i, j]  vertical edge i-lines,   shape (nx + 1, ny)

Tangential electric components on the outer boundary are held at zero
(perfectly conducting walls).
"""

from __future__ import annotations

import numpy as np


def zero_fields(nx, ny):
    return (np.zeros((nx, ny + 1)), np.zeros((nx + 1, ny)),
            np.zeros((nx, ny)))


def apply_pec(ex, ey):
    ex[:, 0] = 0.0
    ex[:, -1] = 0.0
    ey[0, :] = 0.0
    ey[-1, :] = 0.0


def yee_step(ex, ey, hz, dt, eps, mu, hx, hy):
    """One leapfrog step (E first, then H); returns new field arrays."""
    ex = ex.copy()
    ey = ey.copy()
    ex[:, 1:-1] += dt / (eps * hy) * (hz[:, 1:] - hz[:, :-1])
    ey[1:-1, :] -= dt / (eps * hx) * (hz[1:, :] - hz[:-1, :])
    apply_pec(ex, ey)
    curl_e = (ey[1:, :] - ey[:-1, :]) / hx - (ex[:, 1:] - ex[:, :-1]) / hy
    hz = hz - dt / mu * curl_e
    return ex, ey, hz


def yee_reference_run(nx, ny, eps, mu, dt, steps, ex0=None, ey0=None,
                      hz0=None, hx=1.0, hy=1.0, callback=None):
    """Run the staggered reference scheme and return the final fields.

    ``callback(step, ex, ey, hz)`` is invoked after every step when
    given.  Initial tangential boundary values are forced to zero.
    """
    ex, ey, hz = zero_fields(nx, ny)
    if ex0 is not None:
        ex[:, :] = ex0
    if ey0 is not None:
        ey[:, :] = ey0
    if hz0 is not None:
        hz[:, :] = hz0
    apply_pec(ex, ey)
    for step in range(1, steps + 1):
        ex, ey, hz = yee_step(ex, ey, hz, dt, eps, mu, hx, hy)
        if callback is not None:
            callback(step, ex, ey, hz)
    return ex, ey, hz


def yee_energy(ex, ey, hz_before, hz_after, eps, mu, hx, hy):
    """Staggered quadratic invariant of the reference scheme."""
    cell = hx * hy
    e_part = 0.5 * eps * cell * (float(np.sum(ex[:, 1:-1] ** 2))
                                 + float(np.sum(ey[1:-1, :] ** 2)))
    h_part = 0.5 * mu * cell * float(np.sum(hz_before * hz_after))
    return e_part + h_part
