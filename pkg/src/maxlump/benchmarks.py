"""Analytic benchmarks, error norms, convergence studies, Yee comparison.

The cavity mode is the workhorse benchmark: a separable standing wave
on the unit square with unit materials and vanishing tangential
electric field on the boundary, exact for both field equations.  Error
norms are element-wise L2 integrals with a fourth-order quadrature
rule; the H error is also measured against the piecewise element mean
of the exact field, which converges one order faster than the field
itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import refbasis
from .assembly import DofMap, MaterialField, assemble_all
from .mesh import (
    affine_map,
    build_structured_quad_mesh,
    build_structured_tri_mesh,
    refine_uniform_with_map,
)
from .refbasis import PARALLELOGRAM, TRIANGLE
from .stepping import FieldState, estimate_cfl, leapfrog_step, run_leapfrog
from .yee import yee_step, zero_fields

# ----------------------------------------------------------------------
# Quadrature of order 4 on the reference elements (weights sum to the
# reference measure).
# ----------------------------------------------------------------------

_TRI_A1 = 0.445948490915965
_TRI_A2 = 0.091576213509771
_TRI_W1 = 0.223381589678011
_TRI_W2 = 0.109951743655322

_TRI_POINTS = np.array([
    [_TRI_A1, _TRI_A1],
    [1.0 - 2.0 * _TRI_A1, _TRI_A1],
    [_TRI_A1, 1.0 - 2.0 * _TRI_A1],
    [_TRI_A2, _TRI_A2],
    [1.0 - 2.0 * _TRI_A2, _TRI_A2],
    [_TRI_A2, 1.0 - 2.0 * _TRI_A2],
])
_TRI_WEIGHTS = 0.5 * np.array([_TRI_W1, _TRI_W1, _TRI_W1,
                               _TRI_W2, _TRI_W2, _TRI_W2])

_G3_NODES = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_G3_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

_QUAD_POINTS = np.array([[x, y] for y in _G3_NODES for x in _G3_NODES])
_QUAD_WEIGHTS = np.array([wy * wx for wy in _G3_WEIGHTS for wx in _G3_WEIGHTS])

ELEMENT_QUADRATURE = {
    TRIANGLE: (_TRI_POINTS, _TRI_WEIGHTS),
    PARALLELOGRAM: (_QUAD_POINTS, _QUAD_WEIGHTS),
}

# Reference merged-basis values at the quadrature points, including the
# unit-circulation normalization: shape (n_points, n_edges, 2).
_BASIS_AT_QUAD = {}
for _kind in (TRIANGLE, PARALLELOGRAM):
    _pts = ELEMENT_QUADRATURE[_kind][0]
    _norm = refbasis.normalization(_kind)
    _BASIS_AT_QUAD[_kind] = np.array(
        [[_norm * refbasis.eval_merged_basis(_kind, a + 1, p)
          for a in range(refbasis.N_EDGES[_kind])] for p in _pts])


# ----------------------------------------------------------------------
# Exact cavity solution
# ----------------------------------------------------------------------

class CavityMode:
    """Standing transverse-electric mode of the unit-square cavity.

    With unit materials the out-of-plane magnetic field is
    ``cos(m pi x) cos(n pi y) cos(omega t)`` and the in-plane electric
    field follows from the field equations with E(0) = 0, so that
    ``omega = pi sqrt(m^2 + n^2)``.  Tangential E vanishes on the
    boundary of the unit square.
    """

    def __init__(self, m, n):
        if m < 1 or n < 1:
            raise ValueError("mode indices must be >= 1")
        self.m = int(m)
        self.n = int(n)
        self.omega = np.pi * np.sqrt(float(m * m + n * n))

    def h(self, t, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = points[:, 0], points[:, 1]
        return (np.cos(self.m * np.pi * x) * np.cos(self.n * np.pi * y)
                * np.cos(self.omega * t))

    def e(self, t, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = points[:, 0], points[:, 1]
        amp = np.sin(self.omega * t) / self.omega
        ex = -self.n * np.pi * np.cos(self.m * np.pi * x) * np.sin(
            self.n * np.pi * y)
        ey = self.m * np.pi * np.sin(self.m * np.pi * x) * np.cos(
            self.n * np.pi * y)
        return amp * np.column_stack([ex, ey])


def cavity_mode(m, n):
    return CavityMode(m, n)


# ----------------------------------------------------------------------
# Interpolation of initial data
# ----------------------------------------------------------------------

def interpolate_edge_circulations(mesh, dofmap, e_field):
    """Edge dofs of a vector field: 3-point Gauss line integral per edge.

    ``e_field(points)`` must return an (n, 2) array; integrals run from
    the low-index to the high-index endpoint.
    """
    out = np.zeros(dofmap.n_e)
    for i in range(dofmap.n_e):
        edge = dofmap.dof_edge[i]
        a, b = mesh.edges[edge]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        tangent = pb - pa
        points = pa[None, :] + _G3_NODES[:, None] * tangent[None, :]
        values = e_field(points)
        out[i] = float(np.sum(_G3_WEIGHTS * (values @ tangent)))
    return out


def element_means(mesh, scalar_field):
    """Per-element mean of a scalar field via the order-4 rule."""
    out = np.zeros(mesh.n_elements)
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        pts, wts = ELEMENT_QUADRATURE[kind]
        amap = affine_map(mesh, j)
        phys = amap.apply(pts)
        measure = refbasis.REFERENCE_MEASURE[kind]
        out[j] = float(np.sum(wts * scalar_field(phys))) / measure
    return out


def eval_discrete_e(mesh, dofmap, coeffs, element, ref_points=None):
    """Values of the edge-dof field on one element at reference points."""
    kind = mesh.element_kinds[element]
    if ref_points is None:
        basis = _BASIS_AT_QUAD[kind]
    else:
        norm = refbasis.normalization(kind)
        basis = np.array([[norm * refbasis.eval_merged_basis(kind, a + 1, p)
                           for a in range(refbasis.N_EDGES[kind])]
                          for p in np.atleast_2d(ref_points)])
    amap = affine_map(mesh, element)
    local = np.zeros(refbasis.N_EDGES[kind])
    for dof, sign, alpha in zip(dofmap.elem_dofs[element],
                                dofmap.elem_signs[element],
                                dofmap.elem_local_edges[element]):
        local[alpha - 1] = sign * coeffs[dof]
    # (points, edges, 2) contracted against local coefficients, then the
    # covariant map applied to every value.
    vals = np.tensordot(basis, local, axes=([1], [0]))
    return vals @ amap.inv_transpose.T


def error_norms(mesh, dofmap, e, h, exact_e, exact_h):
    """L2 errors of the discrete fields against callables.

    Returns ``(err_e, err_h, err_h_super)`` where the last entry
    measures h against the element means of the exact field.
    """
    acc_e = 0.0
    acc_h = 0.0
    acc_super = 0.0
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        pts, wts = ELEMENT_QUADRATURE[kind]
        amap = affine_map(mesh, j)
        phys = amap.apply(pts)
        measure = refbasis.REFERENCE_MEASURE[kind]
        eh = eval_discrete_e(mesh, dofmap, e, j)
        diff = eh - exact_e(phys)
        acc_e += amap.det * float(np.sum(wts * np.sum(diff * diff, axis=1)))
        hx = exact_h(phys)
        acc_h += amap.det * float(np.sum(wts * (h[j] - hx) ** 2))
        mean = float(np.sum(wts * hx)) / measure
        acc_super += amap.det * measure * (h[j] - mean) ** 2
    return np.sqrt(acc_e), np.sqrt(acc_h), np.sqrt(acc_super)


def discrete_l2_norms(mesh, dofmap, e, h):
    """L2 norms of discrete coefficient vectors (zero exact fields)."""
    zero_e = lambda pts: np.zeros((len(np.atleast_2d(pts)), 2))
    zero_h = lambda pts: np.zeros(len(np.atleast_2d(pts)))
    err_e, err_h, _ = error_norms(mesh, dofmap, e, h, zero_e, zero_h)
    return err_e, err_h


# ----------------------------------------------------------------------
# Nested-mesh restriction (for reference solutions on finer levels)
# ----------------------------------------------------------------------

def restrict_edge_coeffs(parent_dofmap, child_dofmap, refmap, e_child):
    """Pull edge dofs one level up: parent circulation is the oriented
    sum of the circulations of its two child edges."""
    out = np.zeros(parent_dofmap.n_e)
    for i in range(parent_dofmap.n_e):
        edge = parent_dofmap.dof_edge[i]
        total = 0.0
        for child_edge, sign in refmap.edge_children[edge]:
            d = child_dofmap.edge_dof[child_edge]
            total += sign * e_child[d]
        out[i] = total
    return out


def restrict_element_means(refmap, h_child):
    """Pull element values one level up: mean of the four children."""
    return h_child[refmap.element_children].mean(axis=1)


# ----------------------------------------------------------------------
# Convergence study
# ----------------------------------------------------------------------

@dataclass
class EocRow:
    h: float
    dofs: int
    err_e: float
    eoc_e: float
    err_h_super: float
    eoc_h: float


@dataclass
class EocTable:
    reference: str
    rows: list = field(default_factory=list)

    def add(self, h, dofs, err_e, err_h_super):
        if self.rows:
            prev = self.rows[-1]
            eoc_e = np.log2(prev.err_e / err_e) if err_e > 0 else np.nan
            eoc_h = (np.log2(prev.err_h_super / err_h_super)
                     if err_h_super > 0 else np.nan)
        else:
            eoc_e = np.nan
            eoc_h = np.nan
        self.rows.append(EocRow(h, dofs, err_e, eoc_e, err_h_super, eoc_h))


def _cavity_initial_state(mesh, dofmap, mode, dt):
    e0 = interpolate_edge_circulations(mesh, dofmap,
                                       lambda p: mode.e(0.0, p))
    h0 = element_means(mesh, lambda p: mode.h(0.5 * dt, p))
    return FieldState(e0, h0, 0.0, 0.5 * dt)


def _run_level(mesh, t_end, cfl_fraction, mode=None, state=None,
               materials=None):
    """Assemble, pick dt from the stability estimate, run to t_end."""
    ops = assemble_all(mesh, materials)
    dt_max = estimate_cfl(ops["inverse_mass_e"], ops["stiffness"])
    steps = max(1, int(np.ceil(t_end / (cfl_fraction * dt_max))))
    dt = t_end / steps
    if state is None:
        state = _cavity_initial_state(mesh, ops["dofmap"], mode, dt)
    mass_h_inv = ops["mass_h"].inverse()
    final = run_leapfrog(state, dt, steps, ops["inverse_mass_e"], mass_h_inv,
                         ops["curl"])
    return ops, dt, final


def run_cavity_convergence(kind="parallelogram", m=1, n=1, levels=4, base=4,
                           t_end=0.6, cfl_fraction=0.9, reference="exact",
                           extra_reference_levels=2):
    """Errors and convergence orders for the cavity mode on a mesh family.

    Meshes are uniform refinements of a ``base`` x ``base`` grid of the
    requested element kind.  With ``reference="exact"`` errors are taken
    against the analytic mode at the final time; with ``reference="self"``
    against the solution computed ``extra_reference_levels`` below the
    finest level, pulled up by exact nested-mesh restriction.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    builder = (build_structured_quad_mesh if kind == PARALLELOGRAM
               else build_structured_tri_mesh)
    mode = cavity_mode(m, n)

    n_meshes = levels + (extra_reference_levels if reference == "self" else 0)
    meshes = [builder(base, base)]
    refmaps = []
    for _ in range(n_meshes - 1):
        fine, rmap = refine_uniform_with_map(meshes[-1])
        meshes.append(fine)
        refmaps.append(rmap)

    results = []
    for mesh in meshes[:levels]:
        ops, dt, final = _run_level(mesh, t_end, cfl_fraction, mode=mode)
        results.append((mesh, ops, dt, final))

    table = EocTable(reference=f"cavity({m},{n}) {reference} reference, "
                               f"T={t_end:g}, {kind}")
    if reference == "exact":
        for mesh, ops, dt, final in results:
            dofmap = ops["dofmap"]
            err_e, _, err_super = error_norms(
                mesh, dofmap, final.e, final.h,
                lambda p: mode.e(final.time_e, p),
                lambda p: mode.h(final.time_h, p))
            table.add(mesh.max_diameter(), dofmap.n_e + dofmap.n_t,
                      err_e, err_super)
        return table

    if reference != "self":
        raise ValueError(f"unknown reference mode {reference!r}")

    # Reference run on the finest mesh of the family.  Each level's
    # staggered h is averaged over the two half steps around t_end so
    # both sides are compared at the same instant.
    ref_ops, ref_dt, ref_final = _run_level(meshes[-1], t_end, cfl_fraction,
                                            mode=mode)
    e_ref = ref_final.e
    h_ref = _centered_h(ref_ops, ref_dt, ref_final)
    dof_chain = [res[1]["dofmap"] for res in results]
    dof_chain += [DofMap(mesh) for mesh in meshes[levels:-1]]
    dof_chain.append(ref_ops["dofmap"])
    for level, (mesh, ops, dt, final) in enumerate(results):
        dofmap = ops["dofmap"]
        e_down, h_down = e_ref, h_ref
        for lvl in range(len(meshes) - 1, level, -1):
            e_down = restrict_edge_coeffs(dof_chain[lvl - 1], dof_chain[lvl],
                                          refmaps[lvl - 1], e_down)
            h_down = restrict_element_means(refmaps[lvl - 1], h_down)
        h_mid = _centered_h(ops, dt, final)
        err_e, _ = discrete_l2_norms(mesh, dofmap, final.e - e_down,
                                     np.zeros(dofmap.n_t))
        _, err_h = discrete_l2_norms(mesh, dofmap, np.zeros(dofmap.n_e),
                                     h_mid - h_down)
        table.add(mesh.max_diameter(), dofmap.n_e + dofmap.n_t, err_e, err_h)
    return table


def _centered_h(ops, dt, state):
    h_after = state.h
    h_before = state.h + dt * ops["mass_h"].inverse().apply(
        ops["curl"].matvec(state.e))
    return 0.5 * (h_before + h_after)


# ----------------------------------------------------------------------
# Yee coincidence check
# ----------------------------------------------------------------------

def structured_edge_maps(mesh, nx, ny):
    """Index maps from dofs of a structured quad mesh to staggered arrays.

    Returns (horizontal, vertical) lists of ``(dof, i, j)`` tuples
    addressing the ex / ey arrays of the reference scheme.
    """
    dofmap = DofMap(mesh)
    horizontal, vertical = [], []
    for dof in range(dofmap.n_e):
        lo, hi = mesh.edges[dofmap.dof_edge[dof]]
        ix, iy = lo % (nx + 1), lo // (nx + 1)
        if hi == lo + 1:
            horizontal.append((dof, ix, iy))
        elif hi == lo + nx + 1:
            vertical.append((dof, ix, iy))
        else:
            raise ValueError("mesh is not a structured grid")
    return dofmap, horizontal, vertical


def verify_yee_equivalence(nx, ny, steps, dt=None, eps=1.0, mu=1.0, seed=7,
                           perturb_element=None, perturb_factor=2.0):
    """Maximum trajectory difference between the edge-element leapfrog and
    the hand-coded staggered reference scheme on a uniform grid of unit
    squares, started from identical random data.

    ``perturb_element`` scales eps on one element of the finite element
    run only (negative control: the schemes then disagree at O(1)).
    """
    mesh = build_structured_quad_mesh(nx, ny, (0.0, 0.0, float(nx), float(ny)))
    materials = MaterialField.uniform(mesh, eps=eps, mu=mu)
    if perturb_element is not None:
        materials = materials.with_eps_scaled(perturb_element, perturb_factor)
    ops = assemble_all(mesh, materials)
    dofmap = ops["dofmap"]
    _, horizontal, vertical = structured_edge_maps(mesh, nx, ny)

    if dt is None:
        # Half the stability limit of the unit-square grid.
        dt = 0.5 * 2.0 / np.sqrt(8.0 / (eps * mu))

    rng = np.random.default_rng(seed)
    e0 = rng.standard_normal(dofmap.n_e)
    h0 = rng.standard_normal(dofmap.n_t)

    ex, ey, hz = zero_fields(nx, ny)
    for dof, i, j in horizontal:
        ex[i, j] = e0[dof]
    for dof, i, j in vertical:
        ey[i, j] = e0[dof]
    hz[:, :] = h0.reshape(ny, nx).T

    state = FieldState(e0.copy(), h0.copy(), 0.0, 0.5 * dt)
    mass_h_inv = ops["mass_h"].inverse()
    curl = ops["curl"]
    curl_t = curl.transpose()

    max_diff = 0.0
    for step in range(1, steps + 1):
        state = leapfrog_step(state, dt, ops["inverse_mass_e"].matvec,
                              mass_h_inv, curl, curl_t, step=step)
        ex, ey, hz = yee_step(ex, ey, hz, dt, eps, mu, 1.0, 1.0)
        for dof, i, j in horizontal:
            max_diff = max(max_diff, abs(state.e[dof] - ex[i, j]))
        for dof, i, j in vertical:
            max_diff = max(max_diff, abs(state.e[dof] - ey[i, j]))
        max_diff = max(max_diff, float(np.max(np.abs(
            state.h - hz.T.reshape(-1)))))
    return max_diff
