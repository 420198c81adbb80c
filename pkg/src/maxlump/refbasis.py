"""Closed-form edge basis tables on the reference triangle and reference square.

Two element kinds are supported: the unit triangle with vertices
(0,0), (1,0), (0,1) and the unit square with vertices (0,0), (1,0),
(1,1), (0,1), both numbered counter-clockwise.  Local edge ``alpha``
(1-based) is the directed edge running counter-clockwise from local
vertex ``alpha`` to local vertex ``alpha + 1`` (indices mod the vertex
count), so the edges of the square are right, top, left, bottom in that
order and the edges of the triangle are hypotenuse, left, bottom.

For every edge there are two "half" basis functions, indexed by an
endpoint bit ``gamma``: the gamma=0 half is attached to the start
vertex of the directed edge and the gamma=1 half to its end vertex.
Attached means the half is the only basis function of the element that
is nonzero at that vertex, which is what makes the vertex quadrature
rule produce a mass matrix coupling only halves that meet at a common
mesh vertex.  The merged basis function of an edge is the sum of its
two halves; on the triangle it spans the lowest-order Whitney edge
space and on the square the lowest-order edge space of the unit cell.

The raw closed forms below give the triangle functions an edge
circulation of 1/2 and the square functions a circulation of 1.
``normalization(kind)`` returns the per-kind factor (2 for triangles,
1 for squares) that rescales every function to unit circulation on its
own edge; assembly applies it so that a degree of freedom always equals
the tangential line integral along its (low index -> high index) edge.
"""

from __future__ import annotations

import numpy as np

TRIANGLE = "triangle"
PARALLELOGRAM = "parallelogram"
KINDS = (TRIANGLE, PARALLELOGRAM)

REFERENCE_VERTICES = {
    TRIANGLE: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    PARALLELOGRAM: np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
}

# Directed local edges, listed in basis order alpha = 1..n_edges.
# Entry alpha-1 holds (start local vertex, end local vertex).
LOCAL_EDGES = {
    TRIANGLE: ((1, 2), (2, 0), (0, 1)),
    PARALLELOGRAM: ((1, 2), (2, 3), (3, 0), (0, 1)),
}

N_EDGES = {TRIANGLE: 3, PARALLELOGRAM: 4}
N_VERTICES = {TRIANGLE: 3, PARALLELOGRAM: 4}

# Reference area of each element kind.
REFERENCE_MEASURE = {TRIANGLE: 0.5, PARALLELOGRAM: 1.0}

# Every half basis has a constant scalar curl (d/dx of the second
# component minus d/dy of the first) of 1/2 in its raw form.
RAW_HALF_CURL = 0.5

_NORMALIZATION = {TRIANGLE: 2.0, PARALLELOGRAM: 1.0}

# Local vertex at which the (alpha, gamma) half is nonzero.  Follows
# from the directed-edge convention: gamma=0 sits at the edge start,
# gamma=1 at the edge end.
VERTEX_OF_HALF = {
    TRIANGLE: {
        (1, 0): 1, (1, 1): 2,
        (2, 0): 2, (2, 1): 0,
        (3, 0): 0, (3, 1): 1,
    },
    PARALLELOGRAM: {
        (1, 0): 1, (1, 1): 2,
        (2, 0): 2, (2, 1): 3,
        (3, 0): 3, (3, 1): 0,
        (4, 0): 0, (4, 1): 1,
    },
}

# Raw half-basis value at its own vertex (zero at all other vertices).
HALF_VALUE_AT_VERTEX = {
    TRIANGLE: {
        (1, 0): np.array([0.0, 0.5]),
        (1, 1): np.array([-0.5, 0.0]),
        (2, 0): np.array([-0.5, -0.5]),
        (2, 1): np.array([0.0, -0.5]),
        (3, 0): np.array([0.5, 0.0]),
        (3, 1): np.array([0.5, 0.5]),
    },
    PARALLELOGRAM: {
        (1, 0): np.array([0.0, 1.0]),
        (1, 1): np.array([0.0, 1.0]),
        (2, 0): np.array([-1.0, 0.0]),
        (2, 1): np.array([-1.0, 0.0]),
        (3, 0): np.array([0.0, -1.0]),
        (3, 1): np.array([0.0, -1.0]),
        (4, 0): np.array([1.0, 0.0]),
        (4, 1): np.array([1.0, 0.0]),
    },
}


def normalization(kind):
    """Scale factor giving every merged basis unit circulation on its edge."""
    _check_kind(kind)
    return _NORMALIZATION[kind]


def _check_kind(kind):
    if kind not in N_EDGES:
        raise KeyError(f"unknown element kind {kind!r}")


def _check_edge(kind, alpha):
    _check_kind(kind)
    if not 1 <= alpha <= N_EDGES[kind]:
        raise IndexError(f"edge index {alpha} out of range for {kind}")


def eval_half_basis(kind, alpha, gamma, point):
    """Raw value of the (edge ``alpha``, endpoint ``gamma``) half basis.

    ``alpha`` is 1-based, ``gamma`` is 0 or 1, ``point`` is a length-2
    reference coordinate.  Evaluation outside the reference element is
    permitted (the forms are global polynomials).
    """
    _check_edge(kind, alpha)
    if gamma not in (0, 1):
        raise IndexError(f"endpoint bit must be 0 or 1, got {gamma}")
    x, y = float(point[0]), float(point[1])
    if kind == TRIANGLE:
        table = {
            (1, 0): (0.0, x),
            (1, 1): (-y, 0.0),
            (2, 0): (-y, -y),
            (2, 1): (0.0, x + y - 1.0),
            (3, 0): (1.0 - x - y, 0.0),
            (3, 1): (x, x),
        }
    else:
        table = {
            (1, 0): (-y * y + y, -2.0 * x * y + 2.0 * x),
            (1, 1): (y * y - y, 2.0 * x * y),
            (2, 0): (-2.0 * x * y, -x * x + x),
            (2, 1): (-2.0 * y + 2.0 * x * y, x * x - x),
            (3, 0): (y * y - y, 2.0 * x * y - 2.0 * y),
            (3, 1): (-y * y + y, 2.0 * x + 2.0 * y - 2.0 * x * y - 2.0),
            (4, 0): (-2.0 * x - 2.0 * y + 2.0 * x * y + 2.0, x * x - x),
            (4, 1): (-2.0 * x * y + 2.0 * x, -x * x + x),
        }
    u, v = table[(alpha, gamma)]
    return 0.5 * np.array([u, v])


def eval_merged_basis(kind, alpha, point):
    """Raw value of the merged basis of edge ``alpha`` (sum of its halves)."""
    _check_edge(kind, alpha)
    x, y = float(point[0]), float(point[1])
    if kind == TRIANGLE:
        table = {
            1: (-0.5 * y, 0.5 * x),
            2: (-0.5 * y, 0.5 * (x - 1.0)),
            3: (0.5 * (1.0 - y), 0.5 * x),
        }
    else:
        table = {
            1: (0.0, x),
            2: (-y, 0.0),
            3: (0.0, x - 1.0),
            4: (1.0 - y, 0.0),
        }
    return np.array(table[alpha])


def curl_half_basis(kind, alpha, gamma):
    """Constant scalar curl of the raw half basis (always 1/2)."""
    _check_edge(kind, alpha)
    if gamma not in (0, 1):
        raise IndexError(f"endpoint bit must be 0 or 1, got {gamma}")
    return RAW_HALF_CURL


def vertex_quadrature(kind):
    """Vertex rule: reference vertices with equal weights 1/n_vertices.

    Scaled by the element measure the rule integrates affine functions
    exactly on the triangle and additionally the bilinear monomial on
    the square.
    """
    _check_kind(kind)
    points = REFERENCE_VERTICES[kind].copy()
    n = N_VERTICES[kind]
    return points, np.full(n, 1.0 / n)


def vertex_of_half(kind, alpha, gamma):
    """Local index of the unique vertex where the half basis is nonzero."""
    _check_edge(kind, alpha)
    if gamma not in (0, 1):
        raise IndexError(f"endpoint bit must be 0 or 1, got {gamma}")
    return VERTEX_OF_HALF[kind][(alpha, gamma)]


def halves_at_vertex(kind, local_vertex):
    """All (alpha, gamma, raw value) triples nonzero at a local vertex."""
    _check_kind(kind)
    out = []
    for (alpha, gamma), lv in sorted(VERTEX_OF_HALF[kind].items()):
        if lv == local_vertex:
            out.append((alpha, gamma, HALF_VALUE_AT_VERTEX[kind][(alpha, gamma)]))
    return out


_FORM_TEXT = {
    TRIANGLE: [
        "half (1,0) = 1/2 (0, x)             half (1,1) = 1/2 (-y, 0)",
        "half (2,0) = 1/2 (-y, -y)           half (2,1) = 1/2 (0, x+y-1)",
        "half (3,0) = 1/2 (1-x-y, 0)         half (3,1) = 1/2 (x, x)",
        "merged 1 = 1/2 (-y, x)   merged 2 = 1/2 (-y, x-1)   merged 3 = 1/2 (1-y, x)",
    ],
    PARALLELOGRAM: [
        "half (1,0) = 1/2 (-y^2+y, -2xy+2x)  half (1,1) = 1/2 (y^2-y, 2xy)",
        "half (2,0) = 1/2 (-2xy, -x^2+x)     half (2,1) = 1/2 (-2y+2xy, x^2-x)",
        "half (3,0) = 1/2 (y^2-y, 2xy-2y)    half (3,1) = 1/2 (-y^2+y, 2x+2y-2xy-2)",
        "half (4,0) = 1/2 (-2x-2y+2xy+2, x^2-x)  half (4,1) = 1/2 (-2xy+2x, -x^2+x)",
        "merged 1 = (0, x)   merged 2 = (-y, 0)   merged 3 = (0, x-1)   merged 4 = (1-y, 0)",
    ],
}


def dump_basis_text():
    """Human-readable dump of the closed forms and frozen index tables."""
    lines = []
    for kind in KINDS:
        lines.append(f"== {kind} ==")
        verts = REFERENCE_VERTICES[kind]
        lines.append("vertices: " + "  ".join(
            f"{i}:({v[0]:g},{v[1]:g})" for i, v in enumerate(verts)))
        lines.append("directed edges (alpha: start->end): " + "  ".join(
            f"{a + 1}:{s}->{e}" for a, (s, e) in enumerate(LOCAL_EDGES[kind])))
        lines.append(f"normalization factor: {normalization(kind):g}"
                     f"   raw half curl: {RAW_HALF_CURL:g}")
        lines.extend(_FORM_TEXT[kind])
        lines.append("half -> vertex: " + "  ".join(
            f"({a},{g})->{lv}" for (a, g), lv in sorted(VERTEX_OF_HALF[kind].items())))
        pts, wts = vertex_quadrature(kind)
        lines.append("quadrature: points at vertices, weights "
                     + ", ".join(f"{w:g}" for w in wts))
        lines.append("")
    return "\n".join(lines)
