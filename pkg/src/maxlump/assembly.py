"""Assembly of the mass, curl, projection and stiffness matrices.

Degrees of freedom: one "edge dof" per interior mesh edge (tangential
circulation of E from the low-index to the high-index endpoint) and one
"element dof" per element (the out-of-plane H value).  Boundary edges
carry no dof, which builds the perfectly conducting boundary condition
into the spaces.

Each edge dof additionally splits into two "split dofs": split dof i
(for i < n_e) is attached to the low endpoint of edge i, split dof
i + n_e to the high endpoint.  On every incident element a split dof is
represented by the half basis whose endpoint bit points at the same
mesh vertex, so the vertex quadrature rule couples only split dofs
meeting at a common vertex and the lumped mass matrix is exactly
block-diagonal over vertices.

Sign convention: basis functions are mapped with the covariant
transform inverse_transpose(B) and multiplied by +1 when the local
counter-clockwise edge direction agrees with the global low-to-high
direction, by -1 otherwise.  The endpoint bit seen by an element is the
local one when the sign is +1 and the flipped one when it is -1.
"""

from __future__ import annotations

import numpy as np

from . import refbasis
from .linalg import (
    DiagonalMatrix,
    SparseMatrix,
    VertexBlockMatrix,
    triple_product,
)
from .mesh import affine_map
from .refbasis import LOCAL_EDGES, REFERENCE_MEASURE, TRIANGLE


class MaterialField:
    """Piecewise-constant material tensors: one (eps, mu) pair per element.

    ``eps`` is stored as a symmetric positive definite 2x2 tensor per
    element, ``mu`` as a positive scalar per element.
    """

    def __init__(self, eps, mu):
        eps = np.asarray(eps, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if eps.ndim != 3 or eps.shape[1:] != (2, 2):
            raise ValueError("eps must have shape (n_elements, 2, 2)")
        if mu.shape != (eps.shape[0],):
            raise ValueError("mu must have shape (n_elements,)")
        asym = np.max(np.abs(eps - np.transpose(eps, (0, 2, 1)))) if eps.size else 0.0
        if asym > 1e-14 * max(np.max(np.abs(eps)) if eps.size else 0.0, 1e-300):
            raise ValueError("eps tensors must be symmetric")
        for j, tensor in enumerate(eps):
            eig = np.linalg.eigvalsh(tensor)
            if eig[0] <= 0.0:
                raise ValueError(f"eps tensor of element {j} is not positive "
                                 f"definite (eigenvalues {eig})")
        if mu.size and np.min(mu) <= 0.0:
            raise ValueError("mu must be positive")
        self.eps = eps
        self.mu = mu

    @classmethod
    def uniform(cls, mesh, eps=1.0, mu=1.0):
        tensor = _as_tensor(eps)
        return cls(np.repeat(tensor[None, :, :], mesh.n_elements, axis=0),
                   np.full(mesh.n_elements, float(mu)))

    @classmethod
    def from_tags(cls, mesh, eps_by_tag=None, mu_by_tag=None,
                  default_eps=1.0, default_mu=1.0):
        """Materials from per-region overrides keyed by element tag."""
        eps_by_tag = eps_by_tag or {}
        mu_by_tag = mu_by_tag or {}
        present = set(int(t) for t in mesh.element_tags)
        for tag in list(eps_by_tag) + list(mu_by_tag):
            if int(tag) not in present:
                raise KeyError(f"region tag {tag} not present in mesh")
        eps = np.empty((mesh.n_elements, 2, 2))
        mu = np.empty(mesh.n_elements)
        for j in range(mesh.n_elements):
            tag = int(mesh.element_tags[j])
            eps[j] = _as_tensor(eps_by_tag.get(tag, default_eps))
            mu[j] = float(mu_by_tag.get(tag, default_mu))
        return cls(eps, mu)

    def with_eps_scaled(self, element_index, factor):
        """Copy with eps of one element multiplied by ``factor``."""
        eps = self.eps.copy()
        eps[element_index] = eps[element_index] * factor
        return MaterialField(eps, self.mu.copy())


def _as_tensor(eps):
    eps = np.asarray(eps, dtype=float)
    if eps.ndim == 0:
        return np.array([[float(eps), 0.0], [0.0, float(eps)]])
    if eps.shape == (2,):
        return np.diag(eps)
    if eps.shape == (2, 2):
        return eps.copy()
    raise ValueError(f"cannot interpret {eps!r} as a 2x2 permittivity tensor")


class DofMap:
    """Edge/element dof numbering plus orientation and vertex-block data.

    Attributes
    ----------
    n_e : number of interior edges (edge dofs).
    n_t : number of elements (element dofs).
    edge_dof : per mesh edge, the dof index or -1 for boundary edges.
    dof_edge : per dof, the mesh edge index.
    elem_dofs, elem_signs, elem_local_edges : per element, aligned lists
        of its interior-edge dofs, orientation signs and 1-based local
        edge numbers.
    vertex_halves : vertex id -> ascending array of split-dof indices.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.n_t = mesh.n_elements
        interior = mesh.interior_edge_ids
        self.n_e = len(interior)
        self.dof_edge = interior.copy()
        self.edge_dof = np.full(mesh.n_edges, -1, dtype=int)
        self.edge_dof[interior] = np.arange(self.n_e)

        self.elem_dofs = []
        self.elem_signs = []
        self.elem_local_edges = []
        for j in range(mesh.n_elements):
            kind = mesh.element_kinds[j]
            ids = mesh.element_vertices[j]
            dofs, signs, locals_ = [], [], []
            for a, (s, e) in enumerate(LOCAL_EDGES[kind]):
                va, vb = ids[s], ids[e]
                dof = self.edge_dof[mesh.edge_index[(min(va, vb), max(va, vb))]]
                if dof < 0:
                    continue
                dofs.append(dof)
                signs.append(1 if va < vb else -1)
                locals_.append(a + 1)
            self.elem_dofs.append(np.array(dofs, dtype=int))
            self.elem_signs.append(np.array(signs, dtype=int))
            self.elem_local_edges.append(np.array(locals_, dtype=int))

        halves = {}
        for i in range(self.n_e):
            lo, hi = mesh.edges[self.dof_edge[i]]
            halves.setdefault(lo, []).append(i)
            halves.setdefault(hi, []).append(i + self.n_e)
        self.vertex_halves = {v: np.array(sorted(h), dtype=int)
                              for v, h in sorted(halves.items())}

    @property
    def n_split(self):
        return 2 * self.n_e

    def max_vertex_degree(self):
        """Largest number of interior edges meeting at one vertex."""
        return max((len(h) for h in self.vertex_halves.values()), default=0)

    def split_dof(self, dof, sign, local_gamma):
        """Global split dof represented by local endpoint bit ``local_gamma``.

        With positive sign local bit 0 is the low endpoint (split dof
        ``dof``); with negative sign the roles flip.
        """
        ell = local_gamma if sign > 0 else 1 - local_gamma
        return dof + ell * self.n_e

    def local_gamma(self, sign, ell):
        """Local endpoint bit representing global split half ``ell``."""
        return ell if sign > 0 else 1 - ell


def assemble_mass_h(mesh, materials):
    """Diagonal H mass matrix: entry j equals mu_j times the element area."""
    values = np.array([materials.mu[j] * mesh.element_area(j)
                       for j in range(mesh.n_elements)])
    return DiagonalMatrix(values)


def assemble_lumped_mass_e(mesh, materials, dofmap):
    """Vertex-lumped mass matrix on the split edge basis.

    Uses the vertex quadrature rule; because every half basis is nonzero
    at a single vertex the result is exactly block-diagonal over mesh
    vertices with symmetric positive definite blocks.
    """
    vertex_ids = sorted(dofmap.vertex_halves)
    block_pos = {}
    blocks = []
    half_ids = []
    for v in vertex_ids:
        halves = dofmap.vertex_halves[v]
        block_pos[v] = {int(h): p for p, h in enumerate(halves)}
        half_ids.append(halves)
        blocks.append(np.zeros((len(halves), len(halves))))
    block_index = {v: k for k, v in enumerate(vertex_ids)}

    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        ids = mesh.element_vertices[j]
        amap = affine_map(mesh, j)
        area = amap.det * REFERENCE_MEASURE[kind]
        weight = 1.0 / refbasis.N_VERTICES[kind]
        norm = refbasis.normalization(kind)
        eps = materials.eps[j]
        sign_of_local = {}
        dof_of_local = {}
        for dof, sign, alpha in zip(dofmap.elem_dofs[j], dofmap.elem_signs[j],
                                    dofmap.elem_local_edges[j]):
            sign_of_local[int(alpha)] = int(sign)
            dof_of_local[int(alpha)] = int(dof)
        for lv in range(refbasis.N_VERTICES[kind]):
            active = []
            for alpha, gamma, raw in refbasis.halves_at_vertex(kind, lv):
                if alpha not in dof_of_local:
                    continue
                sign = sign_of_local[alpha]
                ell = gamma if sign > 0 else 1 - gamma
                half = dof_of_local[alpha] + ell * dofmap.n_e
                value = sign * norm * (amap.inv_transpose @ raw)
                active.append((half, value))
            if not active:
                continue
            vertex = ids[lv]
            block = blocks[block_index[vertex]]
            pos = block_pos[vertex]
            for ha, ua in active:
                eps_ua = eps @ ua
                for hb, ub in active:
                    block[pos[ha], pos[hb]] += area * weight * float(ub @ eps_ua)
    return VertexBlockMatrix(dofmap.n_split, vertex_ids, half_ids, blocks)


def assemble_split_curl(mesh, dofmap):
    """Curl matrix on the split basis (n_elements x 2 n_e).

    The covariant transform makes the element integral of each mapped
    half's curl equal to the constant reference curl times the reference
    measure, which is 1/2 for every half after normalization; signs
    follow the edge orientation.
    """
    rows, cols, vals = [], [], []
    for j in range(mesh.n_elements):
        for dof, sign in zip(dofmap.elem_dofs[j], dofmap.elem_signs[j]):
            for ell in (0, 1):
                rows.append(j)
                cols.append(int(dof) + ell * dofmap.n_e)
                vals.append(0.5 * float(sign))
    return SparseMatrix.from_coo(rows, cols, vals,
                                 (dofmap.n_t, dofmap.n_split), drop_tol=0.0)


def assemble_curl(mesh, dofmap):
    """Curl matrix on the merged edge basis (n_elements x n_e), entries +-1."""
    rows, cols, vals = [], [], []
    for j in range(mesh.n_elements):
        for dof, sign in zip(dofmap.elem_dofs[j], dofmap.elem_signs[j]):
            rows.append(j)
            cols.append(int(dof))
            vals.append(float(sign))
    return SparseMatrix.from_coo(rows, cols, vals, (dofmap.n_t, dofmap.n_e),
                                 drop_tol=0.0)


def build_projection(n_e):
    """Averaging map from split dofs to edge dofs: 1/2 at columns i, i+n_e."""
    rows = np.repeat(np.arange(n_e, dtype=np.int64), 2)
    cols = np.empty(2 * n_e, dtype=np.int64)
    cols[0::2] = np.arange(n_e)
    cols[1::2] = np.arange(n_e) + n_e
    vals = np.full(2 * n_e, 0.5)
    return SparseMatrix.from_coo(rows, cols, vals, (n_e, 2 * n_e),
                                 drop_tol=0.0)


def build_inverse_mass_e(lumped_mass, projection):
    """Sparse inverse mass on edge dofs: projection-conjugated block inverse.

    Symmetric positive definite by construction; couples only edges that
    share a mesh vertex.
    """
    return triple_product(projection, lumped_mass.invert())


def assemble_stiffness(mesh, materials, dofmap):
    """Curl-curl stiffness on edge dofs weighted by 1/mu.

    Assembled directly element by element; algebraically identical to
    curl^T diag(1/(mu |T|)) curl.
    """
    # Normalized merged curl times reference measure, squared over the
    # reference measure: triangles contribute 2/det, squares 1/det.
    kind_factor = {TRIANGLE: 2.0, refbasis.PARALLELOGRAM: 1.0}
    rows, cols, vals = [], [], []
    for j in range(mesh.n_elements):
        amap = affine_map(mesh, j)
        coef = kind_factor[mesh.element_kinds[j]] / (materials.mu[j] * amap.det)
        dofs = dofmap.elem_dofs[j]
        signs = dofmap.elem_signs[j]
        for a in range(len(dofs)):
            for b in range(len(dofs)):
                rows.append(int(dofs[a]))
                cols.append(int(dofs[b]))
                vals.append(coef * float(signs[a] * signs[b]))
    result = SparseMatrix.from_coo(rows, cols, vals, (dofmap.n_e, dofmap.n_e),
                                   drop_tol=0.0)
    return result.symmetrized()


def assemble_all(mesh, materials=None):
    """Convenience bundle of every operator for one mesh.

    Returns a dict with keys ``dofmap``, ``mass_h``, ``lumped_mass_e``,
    ``split_curl``, ``curl``, ``projection``, ``inverse_mass_e`` and
    ``stiffness``.
    """
    if materials is None:
        materials = MaterialField.uniform(mesh)
    dofmap = DofMap(mesh)
    lumped = assemble_lumped_mass_e(mesh, materials, dofmap)
    projection = build_projection(dofmap.n_e)
    return {
        "dofmap": dofmap,
        "materials": materials,
        "mass_h": assemble_mass_h(mesh, materials),
        "lumped_mass_e": lumped,
        "split_curl": assemble_split_curl(mesh, dofmap),
        "curl": assemble_curl(mesh, dofmap),
        "projection": projection,
        "inverse_mass_e": build_inverse_mass_e(lumped, projection),
        "stiffness": assemble_stiffness(mesh, materials, dofmap),
    }
