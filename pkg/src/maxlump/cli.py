"""Command line interface.

Subcommands: ``mesh gen``, ``mesh info``, ``assemble``, ``run``,
``converge``, ``yee-check`` and ``dump-basis``.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .assembly import assemble_all
from .benchmarks import run_cavity_convergence, verify_yee_equivalence
from .config import ConfigError, load_config
from .mesh import (
    MeshFormatError,
    MeshValidationError,
    build_structured_hybrid_mesh,
    build_structured_quad_mesh,
    build_structured_tri_mesh,
    read_mesh_file,
    refine_uniform,
    write_mesh_file,
)
from .refbasis import PARALLELOGRAM, TRIANGLE, dump_basis_text
from .scenario import run_scenario

_GENERATORS = {
    "quad": build_structured_quad_mesh,
    "tri": build_structured_tri_mesh,
    "hybrid": build_structured_hybrid_mesh,
}

_MATRIX_NAMES = ("mass_h", "lumped_mass_e", "split_curl", "curl",
                 "projection", "inverse_mass_e", "stiffness")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="maxlump",
        description="2D transverse-electric Maxwell solver with a "
                    "block-lumped edge-element mass matrix")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_p = sub.add_parser("mesh", help="generate or inspect meshes")
    mesh_sub = mesh_p.add_subparsers(dest="mesh_command", required=True)
    gen = mesh_sub.add_parser("gen", help="generate a structured mesh")
    gen.add_argument("--kind", choices=sorted(_GENERATORS), default="quad")
    gen.add_argument("--nx", type=int, required=True)
    gen.add_argument("--ny", type=int, required=True)
    gen.add_argument("--bbox", type=float, nargs=4,
                     default=(0.0, 0.0, 1.0, 1.0),
                     metavar=("X0", "Y0", "X1", "Y1"))
    gen.add_argument("--refine", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)
    info = mesh_sub.add_parser("info", help="summarize a mesh file")
    info.add_argument("path")

    asm = sub.add_parser("assemble", help="dump an assembled matrix")
    asm.add_argument("--mesh", help="mesh file (default: structured grid)")
    asm.add_argument("--kind", choices=sorted(_GENERATORS), default="quad")
    asm.add_argument("--nx", type=int, default=4)
    asm.add_argument("--ny", type=int, default=4)
    asm.add_argument("--matrix", choices=_MATRIX_NAMES, required=True)
    asm.add_argument("--eps", type=float, default=1.0)
    asm.add_argument("--mu", type=float, default=1.0)
    asm.add_argument("-o", "--output", help="output path (default stdout)")

    run_p = sub.add_parser("run", help="run a configured scenario")
    run_p.add_argument("config")
    run_p.add_argument("-o", "--output-dir")

    conv = sub.add_parser("converge", help="cavity convergence study")
    conv.add_argument("config")
    conv.add_argument("--levels", type=int, default=4)
    conv.add_argument("-o", "--output-dir")

    yee = sub.add_parser("yee-check",
                         help="compare against the staggered-grid scheme")
    yee.add_argument("--nx", type=int, default=8)
    yee.add_argument("--ny", type=int, default=8)
    yee.add_argument("--steps", type=int, default=100)
    yee.add_argument("--seed", type=int, default=7)

    sub.add_parser("dump-basis", help="print the reference basis tables")
    return parser


def _cmd_mesh_gen(args):
    mesh = _GENERATORS[args.kind](args.nx, args.ny, tuple(args.bbox))
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    write_mesh_file(mesh, args.output)
    print(f"wrote {args.output}: {mesh.n_vertices} vertices, "
          f"{mesh.n_elements} elements, {mesh.n_edges} edges")
    return 0


def _cmd_mesh_info(args):
    mesh = read_mesh_file(args.path)
    kinds = {TRIANGLE: 0, PARALLELOGRAM: 0}
    for k in mesh.element_kinds:
        kinds[k] += 1
    tags = sorted(set(int(t) for t in mesh.element_tags))
    btags = sorted(set(int(t) for f, t in
                       zip(mesh.edge_is_boundary, mesh.boundary_edge_tags)
                       if f))
    print(f"vertices:        {mesh.n_vertices}")
    print(f"elements:        {mesh.n_elements} "
          f"({kinds[TRIANGLE]} triangles, {kinds[PARALLELOGRAM]} "
          "parallelograms)")
    print(f"edges:           {mesh.n_edges} "
          f"({mesh.n_interior_edges} interior)")
    print(f"max diameter:    {mesh.max_diameter():.6g}")
    print(f"total area:      {mesh.total_area():.6g}")
    print(f"region tags:     {tags}")
    print(f"boundary tags:   {btags}")
    return 0


def _cmd_assemble(args):
    if args.mesh:
        mesh = read_mesh_file(args.mesh)
    else:
        mesh = _GENERATORS[args.kind](args.nx, args.ny)
    from .assembly import MaterialField
    materials = MaterialField.uniform(mesh, eps=args.eps, mu=args.mu)
    ops = assemble_all(mesh, materials)
    matrix = ops[args.matrix]
    if args.matrix == "mass_h":
        matrix = matrix.to_sparse()
    elif args.matrix == "lumped_mass_e":
        matrix = matrix.to_sparse()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            matrix.dump_coo(fh)
        print(f"wrote {args.output} ({matrix.nnz} entries)")
    else:
        matrix.dump_coo(sys.stdout)
    return 0


def _cmd_run(args):
    cfg = load_config(args.config)
    result = run_scenario(cfg, outdir=args.output_dir)
    print(f"scenario '{cfg.name}': {result.steps} steps of dt = "
          f"{result.dt:.6g} on {result.mesh.n_elements} elements")
    print(f"final max |e| = {np.max(np.abs(result.final_state.e), initial=0):.6g}, "
          f"max |h| = {np.max(np.abs(result.final_state.h), initial=0):.6g}")
    for path in result.snapshot_paths + result.figure_paths:
        print(f"  {path}")
    return 0


def _cmd_converge(args):
    from .report import eoc_table_text, render_convergence, write_eoc_csv
    cfg = load_config(args.config)
    kind = PARALLELOGRAM if cfg.mesh_kind in ("quad", "hybrid") else TRIANGLE
    base = max(2, cfg.nx)
    reference = "self" if cfg.reference == "self" else "exact"
    table = run_cavity_convergence(kind=kind, m=cfg.cavity_m, n=cfg.cavity_n,
                                   levels=args.levels, base=base,
                                   t_end=cfg.t_end,
                                   cfl_fraction=cfg.cfl_fraction,
                                   reference=reference)
    print(eoc_table_text(table))
    outdir = args.output_dir or cfg.output_directory
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, f"{cfg.output_prefix}_eoc.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        write_eoc_csv(table, fh)
    print(f"wrote {csv_path}")
    if cfg.figures:
        png_path = os.path.join(outdir, f"{cfg.output_prefix}_eoc.png")
        render_convergence(table, png_path)
        print(f"wrote {png_path}")
    return 0


def _cmd_yee_check(args):
    diff = verify_yee_equivalence(args.nx, args.ny, args.steps,
                                  seed=args.seed)
    print(f"max trajectory difference over {args.steps} steps on a "
          f"{args.nx}x{args.ny} grid: {diff:.3e}")
    return 0 if diff < 1e-12 else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "mesh":
            if args.mesh_command == "gen":
                return _cmd_mesh_gen(args)
            return _cmd_mesh_info(args)
        if args.command == "assemble":
            return _cmd_assemble(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "converge":
            return _cmd_converge(args)
        if args.command == "yee-check":
            return _cmd_yee_check(args)
        if args.command == "dump-basis":
            print(dump_basis_text())
            return 0
    except (ConfigError, MeshFormatError, MeshValidationError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
