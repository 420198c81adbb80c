#!/usr/bin/env python3
"""Regenerate the shipped scattering fixture mesh.

Usage: python tools/make_scatter_mesh.py [n] [output]
"""

import sys

from maxlump.mesh import write_mesh_file
from maxlump.scenario import build_scatter_disk_mesh


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
    out = sys.argv[2] if len(sys.argv) > 2 else "data/scatter_disk.mesh"
    mesh = build_scatter_disk_mesh(n=n)
    write_mesh_file(mesh, out)
    print(f"wrote {out}: {mesh.n_vertices} vertices, {mesh.n_elements} "
          f"elements, {mesh.n_interior_edges} interior edges")


if __name__ == "__main__":
    main()
