"""Shared mesh builders for the test suite."""

import numpy as np

from maxlump.mesh import (
    Mesh,
    build_structured_hybrid_mesh,
    build_structured_tri_mesh,
)


def jitter_interior_vertices(mesh, amplitude, seed):
    """Randomly displace interior vertices, keeping the boundary fixed."""
    rng = np.random.default_rng(seed)
    on_boundary = np.zeros(mesh.n_vertices, dtype=bool)
    for i in range(mesh.n_edges):
        if mesh.edge_is_boundary[i]:
            a, b = mesh.edges[i]
            on_boundary[a] = True
            on_boundary[b] = True
    verts = np.array(mesh.vertices)
    shift = rng.uniform(-amplitude, amplitude, size=verts.shape)
    shift[on_boundary] = 0.0
    return verts + shift


def jittered_tri_mesh(nx=6, ny=6, amplitude=None, seed=42,
                      bbox=(0.0, 0.0, 1.0, 1.0)):
    """Unstructured triangle mesh: structured grid with jittered vertices."""
    base = build_structured_tri_mesh(nx, ny, bbox)
    if amplitude is None:
        amplitude = 0.15 * (bbox[2] - bbox[0]) / nx
    verts = jitter_interior_vertices(base, amplitude, seed)
    elements = list(zip(base.element_kinds, base.element_vertices))
    return Mesh(verts, elements)


def hybrid_demo_mesh(nx=10, ny=10):
    """Conforming mixed triangle/parallelogram mesh with >= 100 elements."""
    return build_structured_hybrid_mesh(nx, ny)
