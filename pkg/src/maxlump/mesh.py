"""Hybrid triangle/parallelogram meshes: topology, generators, file I/O.

A mesh stores vertices, elements (triangles and parallelograms in
counter-clockwise order) and a derived edge table.  Edges are stored as
vertex pairs with the lower index first; this lexicographic direction
is the global orientation from which every sign convention downstream
is derived.  Boundary edges carry an integer tag, elements an integer
region tag (both default 0).

The text file format (UTF-8, ``#`` starts a comment):

    maxlump-mesh 1
    <n_vertices> <n_elements>
    v <x> <y>                 (n_vertices lines)
    t <i> <j> <k> [tag]       (triangle, 0-based CCW vertex ids)
    q <i> <j> <k> <l> [tag]   (parallelogram)
    b <i> <j> <tag>           (optional boundary edge tags)

Edges are always derived, never stored.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .refbasis import (
    LOCAL_EDGES,
    PARALLELOGRAM,
    REFERENCE_MEASURE,
    TRIANGLE,
)

MESH_HEADER = "maxlump-mesh 1"


class MeshValidationError(ValueError):
    """Raised when a mesh violates a structural invariant."""


class MeshFormatError(ValueError):
    """Raised on malformed mesh files; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class AffineMap:
    """Affine map x = offset + matrix @ x_ref onto one element."""

    offset: np.ndarray
    matrix: np.ndarray
    det: float
    inv_transpose: np.ndarray

    def apply(self, ref_points):
        return self.offset + np.asarray(ref_points) @ self.matrix.T


class Mesh:
    """Conforming 2D mesh of triangles and parallelograms.

    Parameters
    ----------
    vertices : (n, 2) float array
        Vertex coordinates.
    elements : sequence of (kind, vertex ids)
        ``kind`` is ``"triangle"`` or ``"parallelogram"``; ids are
        counter-clockwise.
    boundary_edge_tags : dict, optional
        Maps a boundary edge vertex pair (low, high) to an integer tag.
    element_tags : sequence of int, optional
        Region tag per element (default all 0).

    The constructor derives the edge table and validates conformity,
    orientation and the parallelogram closure property.
    """

    def __init__(self, vertices, elements, boundary_edge_tags=None,
                 element_tags=None):
        self.vertices = np.array(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshValidationError("vertices must be an (n, 2) array")
        self.element_kinds = []
        self.element_vertices = []
        for kind, ids in elements:
            ids = tuple(int(i) for i in ids)
            if kind == TRIANGLE and len(ids) != 3:
                raise MeshValidationError("triangle needs 3 vertices")
            if kind == PARALLELOGRAM and len(ids) != 4:
                raise MeshValidationError("parallelogram needs 4 vertices")
            if kind not in (TRIANGLE, PARALLELOGRAM):
                raise MeshValidationError(f"unknown element kind {kind!r}")
            if len(set(ids)) != len(ids):
                raise MeshValidationError(f"repeated vertex in element {ids}")
            if max(ids) >= len(self.vertices) or min(ids) < 0:
                raise MeshValidationError(
                    f"element references vertex out of range: {ids}")
            self.element_kinds.append(kind)
            self.element_vertices.append(ids)
        if element_tags is None:
            self.element_tags = np.zeros(self.n_elements, dtype=int)
        else:
            self.element_tags = np.asarray(element_tags, dtype=int).copy()
            if self.element_tags.shape != (self.n_elements,):
                raise MeshValidationError("element_tags length mismatch")

        self._build_edges()
        self._validate_geometry()

        self.boundary_edge_tags = np.zeros(self.n_edges, dtype=int)
        if boundary_edge_tags:
            for (a, b), tag in boundary_edge_tags.items():
                key = (min(a, b), max(a, b))
                idx = self.edge_index.get(key)
                if idx is None:
                    raise MeshValidationError(f"tagged edge {key} not in mesh")
                if self.edge_is_boundary[idx] != 1:
                    raise MeshValidationError(
                        f"tagged edge {key} is not a boundary edge")
                self.boundary_edge_tags[idx] = int(tag)

        self.vertices.setflags(write=False)
        self.element_tags.setflags(write=False)

    # ------------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.element_kinds)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def interior_edge_ids(self):
        return self._interior_edge_ids

    @property
    def n_interior_edges(self):
        return len(self._interior_edge_ids)

    # ------------------------------------------------------------------
    def _build_edges(self):
        incident = {}
        for j, (kind, ids) in enumerate(zip(self.element_kinds,
                                            self.element_vertices)):
            for a, b in LOCAL_EDGES[kind]:
                va, vb = ids[a], ids[b]
                key = (min(va, vb), max(va, vb))
                incident.setdefault(key, []).append(j)
        self.edges = sorted(incident)
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        self.edge_elements = [tuple(incident[e]) for e in self.edges]
        self.edge_is_boundary = np.array(
            [1 if len(incident[e]) == 1 else 0 for e in self.edges], dtype=int)
        for e, elems in zip(self.edges, self.edge_elements):
            if len(elems) > 2:
                raise MeshValidationError(
                    f"edge {e} shared by {len(elems)} elements; mesh is "
                    "non-conforming")
        self._interior_edge_ids = np.array(
            [i for i, f in enumerate(self.edge_is_boundary) if f == 0],
            dtype=int)

    def _validate_geometry(self):
        for j in range(self.n_elements):
            amap = affine_map(self, j)
            if self.element_kinds[j] == PARALLELOGRAM:
                ids = self.element_vertices[j]
                p = self.vertices[list(ids)]
                closure = p[1] + p[3] - p[0]
                diam = self.element_diameter(j)
                if np.max(np.abs(p[2] - closure)) > 1e-12 * max(diam, 1e-300):
                    raise MeshValidationError(
                        f"element {j} is not a parallelogram (fourth vertex "
                        "misses the closure point)")
            del amap

    # ------------------------------------------------------------------
    def element_coords(self, j):
        """Vertex coordinates of element ``j`` as an (n, 2) array."""
        return self.vertices[list(self.element_vertices[j])]

    def element_diameter(self, j):
        p = self.element_coords(j)
        d = 0.0
        for a in range(len(p)):
            for b in range(a + 1, len(p)):
                d = max(d, float(np.hypot(*(p[a] - p[b]))))
        return d

    def element_area(self, j):
        amap = affine_map(self, j)
        return amap.det * REFERENCE_MEASURE[self.element_kinds[j]]

    def element_centroid(self, j):
        return self.element_coords(j).mean(axis=0)

    def max_diameter(self):
        return max(self.element_diameter(j) for j in range(self.n_elements))

    def total_area(self):
        return sum(self.element_area(j) for j in range(self.n_elements))

    def edge_vector(self, i):
        """Vector from the low-index to the high-index endpoint of edge i."""
        a, b = self.edges[i]
        return self.vertices[b] - self.vertices[a]

    def edge_midpoint(self, i):
        a, b = self.edges[i]
        return 0.5 * (self.vertices[a] + self.vertices[b])

    def edge_length(self, i):
        return float(np.hypot(*self.edge_vector(i)))


def affine_map(mesh, element_index):
    """Affine map from the reference element onto element ``element_index``.

    The reference triangle has vertices (0,0), (1,0), (0,1); the
    reference square is the unit square.  Raises ``MeshValidationError``
    for inverted (negative determinant) elements.
    """
    kind = mesh.element_kinds[element_index]
    p = mesh.element_coords(element_index)
    if kind == TRIANGLE:
        matrix = np.column_stack([p[1] - p[0], p[2] - p[0]])
    else:
        matrix = np.column_stack([p[1] - p[0], p[3] - p[0]])
    det = float(matrix[0, 0] * matrix[1, 1] - matrix[0, 1] * matrix[1, 0])
    if det <= 0.0:
        raise MeshValidationError(
            f"element {element_index} has non-positive orientation "
            f"(det = {det:g})")
    inv_t = np.array([[matrix[1, 1], -matrix[1, 0]],
                      [-matrix[0, 1], matrix[0, 0]]]) / det
    return AffineMap(offset=p[0].copy(), matrix=matrix, det=det,
                     inv_transpose=inv_t)


# ----------------------------------------------------------------------
# Generators
# ----------------------------------------------------------------------

def _check_grid_args(nx, ny, bbox):
    if nx < 1 or ny < 1:
        raise ValueError(f"grid counts must be positive, got {nx} x {ny}")
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bounding box {bbox}")
    return float(x0), float(y0), float(x1), float(y1)


def _grid_vertices(nx, ny, bbox):
    x0, y0, x1, y1 = _check_grid_args(nx, ny, bbox)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    verts = np.array([[x, y] for y in ys for x in xs])
    return verts


def build_structured_quad_mesh(nx, ny, bbox=(0.0, 0.0, 1.0, 1.0)):
    """Uniform nx-by-ny mesh of axis-aligned rectangles over ``bbox``.

    Produces nx*ny parallelogram elements on (nx+1)(ny+1) vertices;
    element (ix, iy) has index iy*nx + ix.
    """
    verts = _grid_vertices(nx, ny, bbox)
    elements = []
    for iy in range(ny):
        for ix in range(nx):
            v0 = iy * (nx + 1) + ix
            elements.append((PARALLELOGRAM,
                             (v0, v0 + 1, v0 + nx + 2, v0 + nx + 1)))
    return Mesh(verts, elements)


def build_structured_tri_mesh(nx, ny, bbox=(0.0, 0.0, 1.0, 1.0)):
    """Uniform triangle mesh: each grid cell split along its main diagonal."""
    verts = _grid_vertices(nx, ny, bbox)
    elements = []
    for iy in range(ny):
        for ix in range(nx):
            v0 = iy * (nx + 1) + ix
            v1, v2, v3 = v0 + 1, v0 + nx + 2, v0 + nx + 1
            elements.append((TRIANGLE, (v0, v1, v2)))
            elements.append((TRIANGLE, (v0, v2, v3)))
    return Mesh(verts, elements)


def build_structured_hybrid_mesh(nx, ny, bbox=(0.0, 0.0, 1.0, 1.0)):
    """Mixed mesh: cells in the left half split into triangles, rest quads."""
    verts = _grid_vertices(nx, ny, bbox)
    elements = []
    for iy in range(ny):
        for ix in range(nx):
            v0 = iy * (nx + 1) + ix
            v1, v2, v3 = v0 + 1, v0 + nx + 2, v0 + nx + 1
            if ix < nx // 2:
                elements.append((TRIANGLE, (v0, v1, v2)))
                elements.append((TRIANGLE, (v0, v2, v3)))
            else:
                elements.append((PARALLELOGRAM, (v0, v1, v2, v3)))
    return Mesh(verts, elements)


# ----------------------------------------------------------------------
# Uniform refinement
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RefinementMap:
    """Parent-to-child index maps produced by one uniform refinement.

    ``edge_children[i]`` holds the two (child edge id, direction sign)
    pairs covering parent edge i from its low to its high endpoint; the
    sign is +1 when the child edge's stored (low, high) direction agrees
    with the traversal.  ``element_children[j]`` lists the 4 children of
    parent element j.
    """

    edge_children: list
    element_children: np.ndarray


def refine_uniform(mesh):
    """Split every element into 4 congruent children of the same kind."""
    return refine_uniform_with_map(mesh)[0]


def refine_uniform_with_map(mesh):
    """Like :func:`refine_uniform` but also returns the index maps."""
    n_v = mesh.n_vertices
    midpoints = np.array([mesh.edge_midpoint(i) for i in range(mesh.n_edges)]
                         ).reshape(mesh.n_edges, 2)
    quad_ids = [j for j in range(mesh.n_elements)
                if mesh.element_kinds[j] == PARALLELOGRAM]
    centers = np.array([mesh.element_centroid(j) for j in quad_ids]
                       ).reshape(len(quad_ids), 2)
    center_of = {j: n_v + mesh.n_edges + k for k, j in enumerate(quad_ids)}
    verts = np.vstack([mesh.vertices, midpoints, centers])

    def mid(a, b):
        return n_v + mesh.edge_index[(min(a, b), max(a, b))]

    elements = []
    element_tags = []
    element_children = np.zeros((mesh.n_elements, 4), dtype=int)
    for j in range(mesh.n_elements):
        kind = mesh.element_kinds[j]
        ids = mesh.element_vertices[j]
        first = len(elements)
        if kind == TRIANGLE:
            v0, v1, v2 = ids
            m01, m12, m02 = mid(v0, v1), mid(v1, v2), mid(v0, v2)
            elements.extend([
                (TRIANGLE, (v0, m01, m02)),
                (TRIANGLE, (m01, v1, m12)),
                (TRIANGLE, (m02, m12, v2)),
                (TRIANGLE, (m01, m12, m02)),
            ])
        else:
            v0, v1, v2, v3 = ids
            m01, m12 = mid(v0, v1), mid(v1, v2)
            m23, m30 = mid(v2, v3), mid(v3, v0)
            c = center_of[j]
            elements.extend([
                (PARALLELOGRAM, (v0, m01, c, m30)),
                (PARALLELOGRAM, (m01, v1, m12, c)),
                (PARALLELOGRAM, (c, m12, v2, m23)),
                (PARALLELOGRAM, (m30, c, m23, v3)),
            ])
        element_children[j] = [first, first + 1, first + 2, first + 3]
        element_tags.extend([mesh.element_tags[j]] * 4)

    boundary_tags = {}
    for i in range(mesh.n_edges):
        tag = mesh.boundary_edge_tags[i]
        if mesh.edge_is_boundary[i] and tag != 0:
            a, b = mesh.edges[i]
            m = n_v + i
            boundary_tags[(min(a, m), max(a, m))] = tag
            boundary_tags[(min(m, b), max(m, b))] = tag

    fine = Mesh(verts, elements, boundary_edge_tags=boundary_tags,
                element_tags=element_tags)

    edge_children = []
    for i in range(mesh.n_edges):
        a, b = mesh.edges[i]
        m = n_v + i
        pairs = []
        for s, t in ((a, m), (m, b)):
            cid = fine.edge_index[(min(s, t), max(s, t))]
            pairs.append((cid, 1 if s < t else -1))
        edge_children.append(tuple(pairs))
    return fine, RefinementMap(edge_children=edge_children,
                               element_children=element_children)


# ----------------------------------------------------------------------
# File I/O
# ----------------------------------------------------------------------

def _fmt(x):
    return f"{x:.17g}"


def write_mesh(mesh, stream):
    """Write a mesh in the plain-text format (lossless decimal output)."""
    stream.write(MESH_HEADER + "\n")
    stream.write(f"{mesh.n_vertices} {mesh.n_elements}\n")
    for x, y in mesh.vertices:
        stream.write(f"v {_fmt(x)} {_fmt(y)}\n")
    for kind, ids, tag in zip(mesh.element_kinds, mesh.element_vertices,
                              mesh.element_tags):
        code = "t" if kind == TRIANGLE else "q"
        suffix = f" {tag}" if tag != 0 else ""
        stream.write(f"{code} " + " ".join(str(i) for i in ids) + suffix + "\n")
    for i in range(mesh.n_edges):
        if mesh.edge_is_boundary[i] and mesh.boundary_edge_tags[i] != 0:
            a, b = mesh.edges[i]
            stream.write(f"b {a} {b} {mesh.boundary_edge_tags[i]}\n")


def read_mesh(stream):
    """Parse a mesh file, validating topology; errors carry line numbers."""
    lines = stream.read().splitlines()
    cleaned = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            cleaned.append((lineno, text))
    if not cleaned:
        raise MeshFormatError("empty mesh file")
    lineno, header = cleaned[0]
    if header != MESH_HEADER:
        raise MeshFormatError(f"bad header {header!r}, expected "
                              f"{MESH_HEADER!r}", line=lineno)
    if len(cleaned) < 2:
        raise MeshFormatError("missing count line", line=lineno)
    lineno, counts = cleaned[1]
    parts = counts.split()
    if len(parts) != 2:
        raise MeshFormatError("count line must be '<n_vertices> <n_elements>'",
                              line=lineno)
    try:
        n_vertices, n_elements = int(parts[0]), int(parts[1])
    except ValueError:
        raise MeshFormatError("counts must be integers", line=lineno) from None

    vertices = []
    elements = []
    element_tags = []
    boundary = {}
    for lineno, text in cleaned[2:]:
        parts = text.split()
        code, args = parts[0], parts[1:]
        if code == "v":
            if len(args) != 2:
                raise MeshFormatError("vertex line needs 2 coordinates",
                                      line=lineno)
            try:
                vertices.append((float(args[0]), float(args[1])))
            except ValueError:
                raise MeshFormatError("bad vertex coordinate",
                                      line=lineno) from None
        elif code in ("t", "q"):
            nv = 3 if code == "t" else 4
            if len(args) not in (nv, nv + 1):
                raise MeshFormatError(
                    f"'{code}' line needs {nv} vertex ids and an optional "
                    "region tag", line=lineno)
            try:
                ids = [int(a) for a in args[:nv]]
                tag = int(args[nv]) if len(args) == nv + 1 else 0
            except ValueError:
                raise MeshFormatError("bad element index", line=lineno) from None
            for i in ids:
                if not 0 <= i < n_vertices:
                    raise MeshFormatError(
                        f"vertex index {i} out of range [0, {n_vertices})",
                        line=lineno)
            kind = TRIANGLE if code == "t" else PARALLELOGRAM
            elements.append((kind, tuple(ids)))
            element_tags.append(tag)
        elif code == "b":
            if len(args) != 3:
                raise MeshFormatError("'b' line needs two ids and a tag",
                                      line=lineno)
            try:
                a, b, tag = int(args[0]), int(args[1]), int(args[2])
            except ValueError:
                raise MeshFormatError("bad boundary tag line",
                                      line=lineno) from None
            boundary[(min(a, b), max(a, b))] = tag
        else:
            raise MeshFormatError(f"unknown record {code!r}", line=lineno)

    if len(vertices) != n_vertices:
        raise MeshFormatError(
            f"header declares {n_vertices} vertices, found {len(vertices)}")
    if len(elements) != n_elements:
        raise MeshFormatError(
            f"header declares {n_elements} elements, found {len(elements)}")
    try:
        return Mesh(np.array(vertices, dtype=float).reshape(n_vertices, 2),
                    elements, boundary_edge_tags=boundary,
                    element_tags=element_tags)
    except MeshValidationError as exc:
        raise MeshFormatError(str(exc)) from exc


def read_mesh_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return read_mesh(fh)


def write_mesh_file(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        write_mesh(mesh, fh)


def mesh_to_text(mesh):
    buf = io.StringIO()
    write_mesh(mesh, buf)
    return buf.getvalue()
