"""Assembled operators against dense quadrature oracles and hand values."""

import numpy as np
import pytest

from conftest import hybrid_demo_mesh, jittered_tri_mesh
from maxlump import refbasis
from maxlump.assembly import (
    DofMap,
    MaterialField,
    assemble_all,
    assemble_curl,
    assemble_lumped_mass_e,
    assemble_mass_h,
    assemble_split_curl,
    build_inverse_mass_e,
    build_projection,
)
from maxlump.benchmarks import ELEMENT_QUADRATURE
from maxlump.linalg import AssemblyDegeneracyError
from maxlump.mesh import (
    Mesh,
    affine_map,
    build_structured_quad_mesh,
    build_structured_tri_mesh,
)
from maxlump.refbasis import REFERENCE_MEASURE, TRIANGLE

UNIT = (0.0, 0.0, 1.0, 1.0)

ANISO = np.array([[2.0, 0.4], [0.4, 1.0]])


def unit_grid(n):
    """n x n grid of unit squares."""
    return build_structured_quad_mesh(n, n, (0.0, 0.0, float(n), float(n)))


def eval_split_dof(mesh, dofmap, element, dof, ell, ref_point):
    """Mapped split-basis value on one element, straight from the
    polynomial tables (independent of the assembly scatter path)."""
    kind = mesh.element_kinds[element]
    amap = affine_map(mesh, element)
    norm = refbasis.normalization(kind)
    for d, sign, alpha in zip(dofmap.elem_dofs[element],
                              dofmap.elem_signs[element],
                              dofmap.elem_local_edges[element]):
        if d == dof:
            gamma = ell if sign > 0 else 1 - ell
            raw = refbasis.eval_half_basis(kind, int(alpha), gamma, ref_point)
            return sign * norm * (amap.inv_transpose @ raw)
    return np.zeros(2)


def dense_split_mass_oracle(mesh, materials, dofmap):
    """Vertex-rule mass matrix on split dofs assembled densely."""
    n = dofmap.n_split
    out = np.zeros((n, n))
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        amap = affine_map(mesh, j)
        area = amap.det * REFERENCE_MEASURE[kind]
        weight = 1.0 / refbasis.N_VERTICES[kind]
        eps = materials.eps[j]
        for vertex in refbasis.REFERENCE_VERTICES[kind]:
            values = {}
            for dof in dofmap.elem_dofs[j]:
                for ell in (0, 1):
                    v = eval_split_dof(mesh, dofmap, j, dof, ell, vertex)
                    if np.any(v != 0.0):
                        values[int(dof) + ell * dofmap.n_e] = v
            for p, up in values.items():
                for q, uq in values.items():
                    out[p, q] += area * weight * float(uq @ (eps @ up))
    return out


# ----------------------------------------------------------------------
# Materials and dof map
# ----------------------------------------------------------------------

def test_material_validation():
    mesh = unit_grid(2)
    with pytest.raises(ValueError, match="symmetric"):
        MaterialField(np.tile(np.array([[1.0, 0.5], [0.0, 1.0]]),
                              (mesh.n_elements, 1, 1)),
                      np.ones(mesh.n_elements))
    with pytest.raises(ValueError, match="positive definite"):
        MaterialField.uniform(mesh, eps=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError, match="mu"):
        MaterialField.uniform(mesh, mu=-1.0)
    with pytest.raises(KeyError, match="region tag"):
        MaterialField.from_tags(mesh, eps_by_tag={3: 2.0})


def test_dofmap_partitions_halves():
    mesh = hybrid_demo_mesh(6, 4)
    dofmap = DofMap(mesh)
    seen = np.concatenate([h for h in dofmap.vertex_halves.values()])
    assert len(seen) == dofmap.n_split
    assert len(np.unique(seen)) == dofmap.n_split
    # Half i sits at the low endpoint of edge i, half i + n_e at the high.
    for vertex, halves in dofmap.vertex_halves.items():
        for h in halves:
            dof = h % dofmap.n_e
            lo, hi = mesh.edges[dofmap.dof_edge[dof]]
            assert vertex == (lo if h < dofmap.n_e else hi)


def test_dofmap_signs_follow_global_direction():
    mesh = build_structured_tri_mesh(3, 3, UNIT)
    dofmap = DofMap(mesh)
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        ids = mesh.element_vertices[j]
        for dof, sign, alpha in zip(dofmap.elem_dofs[j], dofmap.elem_signs[j],
                                    dofmap.elem_local_edges[j]):
            s, e = refbasis.LOCAL_EDGES[kind][alpha - 1]
            assert sign == (1 if ids[s] < ids[e] else -1)


# ----------------------------------------------------------------------
# H mass matrix
# ----------------------------------------------------------------------

def test_mass_h_unit_square():
    mesh = build_structured_quad_mesh(1, 1, UNIT)
    m = assemble_mass_h(mesh, MaterialField.uniform(mesh, mu=1.0))
    np.testing.assert_array_equal(m.values, [1.0])


def test_mass_h_reference_triangle():
    mesh = Mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [(TRIANGLE, (0, 1, 2))])
    m = assemble_mass_h(mesh, MaterialField.uniform(mesh, mu=2.0))
    np.testing.assert_allclose(m.values, [1.0], atol=0.0)


def test_mass_h_scaled_square():
    h = 0.3
    mesh = build_structured_quad_mesh(1, 1, (0.0, 0.0, h, h))
    m = assemble_mass_h(mesh, MaterialField.uniform(mesh, mu=3.0))
    np.testing.assert_allclose(m.values, [3.0 * h * h], rtol=1e-15)


# ----------------------------------------------------------------------
# Lumped E mass matrix
# ----------------------------------------------------------------------

def test_lumped_mass_uniform_grid_is_half_identity():
    mesh = unit_grid(3)
    dofmap = DofMap(mesh)
    lumped = assemble_lumped_mass_e(mesh, MaterialField.uniform(mesh), dofmap)
    dense = lumped.to_sparse().to_dense()
    np.testing.assert_allclose(dense, 0.5 * np.eye(dofmap.n_split), atol=0.0)


def test_lumped_mass_anisotropic_diagonal_weights():
    # With eps = diag(e1, e2) the half of an x-directed edge carries
    # e1/2, a y-directed edge e2/2 (tangential weighting, two incident
    # elements, weight 1/4 and unit areas).
    e1, e2 = 2.5, 0.75
    mesh = unit_grid(3)
    dofmap = DofMap(mesh)
    materials = MaterialField.uniform(mesh, eps=np.array([e1, e2]))
    lumped = assemble_lumped_mass_e(mesh, materials, dofmap)
    dense = lumped.to_sparse().to_dense()
    np.testing.assert_allclose(dense - np.diag(np.diag(dense)),
                               np.zeros_like(dense), atol=0.0)
    for dof in range(dofmap.n_e):
        lo, hi = mesh.edges[dofmap.dof_edge[dof]]
        expected = e1 / 2.0 if hi == lo + 1 else e2 / 2.0
        for h in (dof, dof + dofmap.n_e):
            assert abs(dense[h, h] - expected) < 1e-15


@pytest.mark.parametrize("mesh,materials_eps", [
    (hybrid_demo_mesh(4, 3), ANISO),
    (jittered_tri_mesh(4, 4, seed=11), ANISO),
    (build_structured_tri_mesh(3, 2, UNIT), 1.0),
])
def test_lumped_mass_matches_dense_oracle(mesh, materials_eps):
    dofmap = DofMap(mesh)
    materials = MaterialField.uniform(mesh, eps=materials_eps)
    lumped = assemble_lumped_mass_e(mesh, materials, dofmap)
    dense = lumped.to_sparse().to_dense()
    oracle = dense_split_mass_oracle(mesh, materials, dofmap)
    scale = np.max(np.abs(oracle))
    assert np.max(np.abs(dense - oracle)) < 1e-14 * scale
    # Entries coupling halves of different vertices vanish identically.
    owner = np.zeros(dofmap.n_split, dtype=int)
    for vertex, halves in dofmap.vertex_halves.items():
        owner[halves] = vertex
    for p in range(dofmap.n_split):
        for q in range(dofmap.n_split):
            if owner[p] != owner[q]:
                assert oracle[p, q] == 0.0


def test_lumped_mass_blocks_positive_definite():
    mesh = jittered_tri_mesh(5, 5, seed=12)
    dofmap = DofMap(mesh)
    lumped = assemble_lumped_mass_e(mesh, MaterialField.uniform(mesh, ANISO),
                                    dofmap)
    for block in lumped.blocks:
        assert np.linalg.eigvalsh(block)[0] > 0.0
    lumped.invert()


def test_lumped_mass_empty_for_single_element():
    mesh = build_structured_quad_mesh(1, 1, UNIT)
    dofmap = DofMap(mesh)
    assert dofmap.n_e == 0
    lumped = assemble_lumped_mass_e(mesh, MaterialField.uniform(mesh), dofmap)
    assert lumped.n == 0 and lumped.to_sparse().shape == (0, 0)


# ----------------------------------------------------------------------
# Curl matrices and projection
# ----------------------------------------------------------------------

def stacked_pair_mesh():
    """Two unit squares sharing one horizontal interior edge."""
    return build_structured_quad_mesh(1, 2, (0.0, 0.0, 1.0, 2.0))


def test_split_curl_single_edge_fixture():
    mesh = stacked_pair_mesh()
    dofmap = DofMap(mesh)
    assert dofmap.n_e == 1
    ctil = assemble_split_curl(mesh, dofmap).to_dense()
    # Lower element sees the edge against its orientation, upper with it.
    np.testing.assert_array_equal(ctil, [[-0.5, -0.5], [0.5, 0.5]])


def test_curl_single_edge_fixture():
    mesh = stacked_pair_mesh()
    dofmap = DofMap(mesh)
    c = assemble_curl(mesh, dofmap).to_dense()
    np.testing.assert_array_equal(c, [[-1.0], [1.0]])


def test_curl_interior_element_yee_stencil():
    mesh = unit_grid(4)
    dofmap = DofMap(mesh)
    c = assemble_curl(mesh, dofmap)
    j = 1 * 4 + 1  # element (1, 1): all four edges interior
    row = c.to_dense()[j]
    assert np.sum(row != 0.0) == 4
    assert sorted(row[row != 0.0]) == [-1.0, -1.0, 1.0, 1.0]
    # Orientation: +1 on bottom/right edges, -1 on top/left.
    for dof, sign in zip(dofmap.elem_dofs[j], dofmap.elem_signs[j]):
        lo, hi = mesh.edges[dofmap.dof_edge[dof]]
        horizontal = (hi == lo + 1)
        mid = mesh.edge_midpoint(dofmap.dof_edge[dof])
        centroid = mesh.element_centroid(j)
        if horizontal:
            assert sign == (1 if mid[1] < centroid[1] else -1)
        else:
            assert sign == (1 if mid[0] > centroid[0] else -1)
    # All-interior rows sum to zero: opposite edges cancel.
    assert row.sum() == 0.0
    ctil_row = assemble_split_curl(mesh, dofmap).to_dense()[j]
    assert ctil_row.sum() == 0.0


def test_curl_via_numerical_curl_oracle():
    # Integrate a finite-difference curl of the mapped basis over each
    # element with the order-4 rule and compare entrywise.
    mesh = hybrid_demo_mesh(2, 2)
    dofmap = DofMap(mesh)
    c = assemble_curl(mesh, dofmap).to_dense()
    step = 1e-6
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        amap = affine_map(mesh, j)
        pts, wts = ELEMENT_QUADRATURE[kind]
        for dof in dofmap.elem_dofs[j]:
            def field(x_phys):
                ref = np.linalg.solve(amap.matrix, x_phys - amap.offset)
                total = np.zeros(2)
                for ell in (0, 1):
                    total += eval_split_dof(mesh, dofmap, j, dof, ell, ref)
                return total
            integral = 0.0
            for p, w in zip(pts, wts):
                x = amap.apply(p)
                dv2 = (field(x + [step, 0.0])[1] - field(x - [step, 0.0])[1])
                dv1 = (field(x + [0.0, step])[0] - field(x - [0.0, step])[0])
                integral += amap.det * w * (dv2 - dv1) / (2 * step)
            assert abs(integral - c[j, dof]) < 1e-8


def test_projection_definition():
    p = build_projection(1)
    np.testing.assert_array_equal(p.to_dense(), [[0.5, 0.5]])
    p = build_projection(5)
    x = np.arange(1.0, 6.0)
    np.testing.assert_array_equal(p.matvec(np.concatenate([x, x])), x)
    ppt = p.matmul(p.transpose()).to_dense()
    np.testing.assert_array_equal(ppt, 0.5 * np.eye(5))


@pytest.mark.parametrize("mesh", [
    hybrid_demo_mesh(6, 5),
    jittered_tri_mesh(5, 4, seed=13),
    unit_grid(3),
])
def test_split_curl_factors_through_projection(mesh):
    dofmap = DofMap(mesh)
    ctil = assemble_split_curl(mesh, dofmap)
    c = assemble_curl(mesh, dofmap)
    product = c.matmul(build_projection(dofmap.n_e))
    diff = ctil.to_dense() - product.to_dense()
    assert np.max(np.abs(diff)) == 0.0


# ----------------------------------------------------------------------
# Inverse mass
# ----------------------------------------------------------------------

def test_inverse_mass_uniform_grid_is_identity():
    mesh = unit_grid(3)
    ops = assemble_all(mesh)
    minv = ops["inverse_mass_e"]
    n_e = ops["dofmap"].n_e
    assert minv.nnz == n_e
    np.testing.assert_allclose(minv.to_dense(), np.eye(n_e), atol=1e-15)


def test_inverse_mass_scales_with_eps():
    mesh = jittered_tri_mesh(4, 4, seed=14)
    base = assemble_all(mesh, MaterialField.uniform(mesh, eps=1.0))
    scaled = assemble_all(mesh, MaterialField.uniform(mesh, eps=4.0))
    np.testing.assert_allclose(scaled["inverse_mass_e"].to_dense(),
                               0.25 * base["inverse_mass_e"].to_dense(),
                               rtol=1e-13)


def test_inverse_mass_positive_definite_random_vectors():
    mesh = jittered_tri_mesh(5, 5, seed=15)
    ops = assemble_all(mesh, MaterialField.uniform(mesh, ANISO))
    minv = ops["inverse_mass_e"]
    dense = minv.to_dense()
    np.testing.assert_allclose(dense, dense.T, atol=0.0)
    rng = np.random.default_rng(16)
    for _ in range(100):
        x = rng.standard_normal(minv.rows)
        assert x @ minv.matvec(x) > 0.0


def test_inverse_mass_couples_only_vertex_sharing_edges():
    mesh = jittered_tri_mesh(4, 4, seed=17)
    ops = assemble_all(mesh, MaterialField.uniform(mesh, ANISO))
    minv = ops["inverse_mass_e"]
    dofmap = ops["dofmap"]
    dense = minv.to_dense()
    for i in range(dofmap.n_e):
        vi = set(mesh.edges[dofmap.dof_edge[i]])
        for j in range(dofmap.n_e):
            vj = set(mesh.edges[dofmap.dof_edge[j]])
            if not (vi & vj):
                assert dense[i, j] == 0.0


def test_inverse_mass_propagates_degeneracy():
    lumped = build_degenerate_block_matrix()
    with pytest.raises(AssemblyDegeneracyError):
        build_inverse_mass_e(lumped, build_projection(1))


def build_degenerate_block_matrix():
    from maxlump.linalg import VertexBlockMatrix
    return VertexBlockMatrix(2, [0, 1], [[0], [1]],
                             [np.array([[0.0]]), np.array([[1.0]])])


# ----------------------------------------------------------------------
# Stiffness
# ----------------------------------------------------------------------

@pytest.mark.parametrize("mesh", [
    hybrid_demo_mesh(5, 4),
    jittered_tri_mesh(5, 5, seed=18),
])
def test_stiffness_equals_triple_product(mesh):
    materials = MaterialField.uniform(mesh, mu=1.7)
    ops = assemble_all(mesh, materials)
    k = ops["stiffness"]
    c = ops["curl"]
    oracle = c.transpose().matmul(
        c.scale_rows(ops["mass_h"].inverse().values))
    scale = np.max(np.abs(oracle.to_dense()))
    assert np.max(np.abs(k.to_dense() - oracle.to_dense())) < 1e-13 * scale


def test_stiffness_annihilates_curl_free_fields():
    # Discrete gradients of a potential vanishing on the boundary have
    # zero circulation around every element, hence zero stiffness image.
    mesh = jittered_tri_mesh(5, 5, seed=19)
    ops = assemble_all(mesh)
    dofmap = ops["dofmap"]
    rng = np.random.default_rng(21)
    potential = rng.standard_normal(mesh.n_vertices)
    for i in range(mesh.n_edges):
        if mesh.edge_is_boundary[i]:
            a, b = mesh.edges[i]
            potential[a] = 0.0
            potential[b] = 0.0
    e = np.array([potential[mesh.edges[dofmap.dof_edge[i]][1]]
                  - potential[mesh.edges[dofmap.dof_edge[i]][0]]
                  for i in range(dofmap.n_e)])
    assert np.max(np.abs(ops["curl"].matvec(e))) < 1e-13
    assert np.max(np.abs(ops["stiffness"].matvec(e))) < 1e-12


def test_interpolated_constant_field_is_curl_free_inside():
    # A constant field has zero circulation around any element whose
    # edges are all interior (boundary elements miss the boundary-edge
    # contributions because those carry no dofs).
    from maxlump.benchmarks import interpolate_edge_circulations
    mesh = jittered_tri_mesh(5, 5, seed=19)
    ops = assemble_all(mesh)
    dofmap = ops["dofmap"]
    const = np.array([0.7, -1.3])
    e = interpolate_edge_circulations(
        mesh, dofmap, lambda p: np.tile(const, (len(p), 1)))
    circulations = ops["curl"].matvec(e)
    checked = 0
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        if len(dofmap.elem_dofs[j]) == refbasis.N_EDGES[kind]:
            assert abs(circulations[j]) < 1e-13
            checked += 1
    assert checked > 0


def test_stiffness_single_edge_fixture():
    mesh = stacked_pair_mesh()
    ops = assemble_all(mesh)
    np.testing.assert_allclose(ops["stiffness"].to_dense(), [[2.0]],
                               atol=1e-15)


def test_stiffness_positive_semidefinite():
    mesh = hybrid_demo_mesh(5, 5)
    ops = assemble_all(mesh)
    k = ops["stiffness"]
    rng = np.random.default_rng(20)
    for _ in range(100):
        x = rng.standard_normal(k.rows)
        assert x @ k.matvec(x) >= -1e-12 * float(x @ x)


# ----------------------------------------------------------------------
# Lumped quadrature versus exact integration
# ----------------------------------------------------------------------

def test_assembly_is_bit_deterministic():
    mesh = jittered_tri_mesh(4, 4, seed=23)
    materials = MaterialField.uniform(mesh, ANISO)
    first = assemble_all(mesh, materials)
    second = assemble_all(mesh, materials)
    for name in ("split_curl", "curl", "projection", "inverse_mass_e",
                 "stiffness"):
        assert np.array_equal(first[name].data, second[name].data)
        assert np.array_equal(first[name].indices, second[name].indices)
    for b1, b2 in zip(first["lumped_mass_e"].blocks,
                      second["lumped_mass_e"].blocks):
        assert np.array_equal(b1, b2)
    assert np.array_equal(first["mass_h"].values, second["mass_h"].values)


def test_perpendicular_square_pairs_integrate_to_zero():
    # On a single square the merged bases of perpendicular edges are
    # pointwise orthogonal, so the lumped and exact products coincide.
    mesh = build_structured_quad_mesh(1, 2, (0.0, 0.0, 1.0, 2.0))
    dofmap = DofMap(mesh)
    lumped = assemble_lumped_mass_e(mesh, MaterialField.uniform(mesh), dofmap)
    dense = lumped.to_sparse().to_dense()
    # Single interior edge: both split dofs involve only that edge, and
    # the cross terms with (nonexistent) perpendicular dofs are absent;
    # the diagonal matches the hand value 1/2 per half.
    np.testing.assert_allclose(np.diag(dense), [0.5, 0.5], atol=0.0)
