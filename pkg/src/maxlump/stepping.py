"""Explicit staggered (leapfrog) time integration and diagnostics.

The state carries the edge coefficients ``e`` at integer times and the
element values ``h`` half a step ahead.  One step advances ``e`` with
the transposed curl of ``h`` (minus an optional current source sampled
at the half time) and then ``h`` with the curl of the new ``e``.  Below
the stability limit the scheme conserves the staggered quadratic energy
exactly up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import conjugate_gradient, power_iteration_max_eig

# A field exceeding this factor times its initial scale flags a CFL
# violation long before floats overflow.
BLOW_UP_FACTOR = 1e10


class BlowUpError(RuntimeError):
    """Field magnitudes exploded; reports the offending step index."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


@dataclass
class FieldState:
    """Staggered field coefficients: e at ``time_e``, h at ``time_e + dt/2``."""

    e: np.ndarray
    h: np.ndarray
    time_e: float
    time_h: float

    def copy(self):
        return FieldState(self.e.copy(), self.h.copy(), self.time_e,
                          self.time_h)


class SourceTerm:
    """Additive current on a fixed set of edge dofs.

    ``profile`` holds one static weight per listed dof and ``waveform``
    a scalar function of time; the contribution at time t is
    ``profile * waveform(t)`` scattered into a full-length vector.
    """

    def __init__(self, dof_indices, profile, waveform):
        self.dof_indices = np.asarray(dof_indices, dtype=int)
        self.profile = np.asarray(profile, dtype=float)
        if self.profile.shape != self.dof_indices.shape:
            raise ValueError("profile and dof_indices must align")
        self.waveform = waveform

    def evaluate(self, t, n_e):
        out = np.zeros(n_e)
        if self.dof_indices.size:
            out[self.dof_indices] = self.profile * self.waveform(t)
        return out


def _check_finite(label, array, step):
    if not np.all(np.isfinite(array)):
        raise BlowUpError(
            f"non-finite {label} values at step {step} (time step too large?)",
            step=step)


def update_e(state, dt, apply_minv, curl_t, source=None):
    """Advance e by dt using h at the intermediate half time."""
    rhs = curl_t.matvec(state.h)
    if source is not None:
        rhs = rhs - source.evaluate(state.time_e + 0.5 * dt, len(state.e))
    e_new = state.e + dt * apply_minv(rhs)
    return FieldState(e_new, state.h, state.time_e + dt, state.time_h)


def update_h(state, dt, mass_h_inv, curl):
    """Advance h by dt using the current e."""
    h_new = state.h - dt * mass_h_inv.apply(curl.matvec(state.e))
    return FieldState(state.e, h_new, state.time_e, state.time_h + dt)


def leapfrog_step(state, dt, apply_minv, mass_h_inv, curl, curl_t,
                  source=None, step=0):
    """One staggered step: e first, then h; checks for non-finite values."""
    new = update_e(state, dt, apply_minv, curl_t, source)
    new = update_h(new, dt, mass_h_inv, curl)
    _check_finite("e", new.e, step)
    _check_finite("h", new.h, step)
    return new


def run_leapfrog(state, dt, n_steps, inverse_mass_e, mass_h_inv, curl,
                 source=None, callback=None, callback_stride=1,
                 blow_up_factor=BLOW_UP_FACTOR):
    """Run ``n_steps`` of leapfrog on the edge-dof system.

    ``callback(step, time_e, e, h)`` fires at step 0 and after every
    ``callback_stride``-th step.  Raises :class:`BlowUpError` when field
    magnitudes grow by ``blow_up_factor`` over the initial scale.
    """
    return _run(state, dt, n_steps, inverse_mass_e.matvec, mass_h_inv, curl,
                source, callback, callback_stride, blow_up_factor)


def run_split_leapfrog(state, dt, n_steps, lumped_mass_inv, mass_h_inv,
                       split_curl, source=None, callback=None,
                       callback_stride=1, blow_up_factor=BLOW_UP_FACTOR):
    """Leapfrog on the split-dof system with the block-diagonal mass."""
    return _run(state, dt, n_steps, lumped_mass_inv.apply, mass_h_inv,
                split_curl, source, callback, callback_stride, blow_up_factor)


def _run(state, dt, n_steps, apply_minv, mass_h_inv, curl, source, callback,
         stride, blow_up_factor):
    curl_t = curl.transpose()
    scale0 = max(float(np.max(np.abs(state.e), initial=0.0)),
                 float(np.max(np.abs(state.h), initial=0.0)), 1.0)
    current = state.copy()
    if callback is not None:
        callback(0, current.time_e, current.e, current.h)
    for step in range(1, n_steps + 1):
        current = leapfrog_step(current, dt, apply_minv, mass_h_inv, curl,
                                curl_t, source, step)
        peak = max(float(np.max(np.abs(current.e), initial=0.0)),
                   float(np.max(np.abs(current.h), initial=0.0)))
        if peak > blow_up_factor * scale0:
            raise BlowUpError(
                f"fields grew by more than {blow_up_factor:g}x at step "
                f"{step}; the time step likely violates the stability limit",
                step=step)
        if callback is not None and step % stride == 0:
            callback(step, current.time_e, current.e, current.h)
    return current


def reverse_leapfrog(state, dt, n_steps, inverse_mass_e, mass_h_inv, curl):
    """Undo ``n_steps`` forward steps: h is retracted first, then e."""
    curl_t = curl.transpose()
    current = state.copy()
    for step in range(n_steps):
        h_prev = current.h + dt * mass_h_inv.apply(curl.matvec(current.e))
        mid = FieldState(current.e, h_prev, current.time_e,
                         current.time_h - dt)
        rhs = curl_t.matvec(mid.h)
        e_prev = mid.e - dt * inverse_mass_e.matvec(rhs)
        current = FieldState(e_prev, mid.h, mid.time_e - dt, mid.time_h)
        _check_finite("e", current.e, step)
    return current


def second_order_step(e_now, e_prev, dt, inverse_mass_e, stiffness):
    """Central-difference step of the e-only second order form."""
    return 2.0 * e_now - e_prev - dt * dt * inverse_mass_e.matvec(
        stiffness.matvec(e_now))


def estimate_cfl(inverse_mass_e, stiffness, tol=1e-7, max_iter=200000,
                 seed=20240601):
    """Largest stable time step 2 / sqrt(lambda_max) of the update operator.

    The spectral radius of inverse_mass_e @ stiffness is found by power
    iteration using the stiffness (semi-)inner product, in which the
    operator is self-adjoint.  No safety factor is applied here.
    """
    n = stiffness.rows
    if n == 0:
        return np.inf
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)

    def apply_a(x):
        return inverse_mass_e.matvec(stiffness.matvec(x))

    def inner(a, b):
        return float(a @ stiffness.matvec(b))

    lam = power_iteration_max_eig(apply_a, v0, inner=inner, tol=tol,
                                  max_iter=max_iter)
    if lam <= 0.0:
        return np.inf
    return 2.0 / np.sqrt(lam)


def discrete_energy(e, h_before, h_after, inverse_mass_e, mass_h,
                    cg_tol=1e-13):
    """Staggered quadratic invariant conserved exactly by leapfrog.

    Combines the e-energy (through a conjugate-gradient solve with the
    inverse mass, which is the only form in which the e-mass exists) and
    the product of the two h vectors surrounding the same instant.
    """
    if len(e):
        z = conjugate_gradient(inverse_mass_e.matvec, e, tol=cg_tol,
                               max_iter=10 * len(e) + 50)
        e_part = 0.5 * float(e @ z)
    else:
        e_part = 0.0
    h_part = 0.5 * float(mass_h.apply(h_before) @ h_after)
    return e_part + h_part
