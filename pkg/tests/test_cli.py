"""Command line interface and report rendering."""

import io
import os

import numpy as np

from maxlump.benchmarks import EocTable, run_cavity_convergence
from maxlump.cli import main
from maxlump.linalg import SparseMatrix
from maxlump.refbasis import PARALLELOGRAM
from maxlump.report import eoc_table_text, write_eoc_csv


def test_mesh_gen_and_info(tmp_path, capsys):
    path = tmp_path / "grid.mesh"
    assert main(["mesh", "gen", "--kind", "hybrid", "--nx", "6", "--ny", "4",
                 "-o", str(path)]) == 0
    assert path.exists()
    assert main(["mesh", "info", str(path)]) == 0
    out = capsys.readouterr().out
    assert "vertices:" in out and "triangles" in out
    assert "36" in out  # 3*4 cells split into two triangles each


def test_mesh_gen_refine(tmp_path, capsys):
    path = tmp_path / "fine.mesh"
    assert main(["mesh", "gen", "--nx", "2", "--ny", "2", "--refine", "1",
                 "-o", str(path)]) == 0
    out = capsys.readouterr().out
    assert "16 elements" in out


def test_dump_basis(capsys):
    assert main(["dump-basis"]) == 0
    out = capsys.readouterr().out
    assert "triangle" in out and "normalization factor: 2" in out


def test_assemble_dumps_matrix(tmp_path, capsys):
    path = tmp_path / "curl.txt"
    assert main(["assemble", "--kind", "quad", "--nx", "3", "--ny", "3",
                 "--matrix", "curl", "-o", str(path)]) == 0
    with open(path, "r", encoding="utf-8") as fh:
        matrix = SparseMatrix.read_coo(fh)
    assert matrix.shape == (9, 12)
    assert set(np.unique(matrix.data)) == {-1.0, 1.0}


def test_assemble_to_stdout(capsys):
    assert main(["assemble", "--kind", "quad", "--nx", "2", "--ny", "1",
                 "--matrix", "projection"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "1 2 2"


def test_yee_check_passes(capsys):
    assert main(["yee-check", "--nx", "4", "--ny", "4", "--steps", "20"]) == 0
    out = capsys.readouterr().out
    assert "max trajectory difference" in out


def test_run_and_converge_commands(tmp_path, capsys):
    cfg_path = tmp_path / "case.cfg"
    outdir = tmp_path / "out"
    cfg_path.write_text(f"""
[mesh]
kind = quad
nx = 8
ny = 8

[time]
t_end = 0.2
dt = 0.04
cfl_fraction = 0.9

[source]
type = plane_wave
omega = 12.0
center_time = 0.08
width = 0.04
x_min = 0.0
x_max = 0.15

[output]
directory = {outdir}
prefix = demo
snapshot_stride = 2
figures = true

[scenario]
name = cli-demo
cavity_m = 1
cavity_n = 1
""", encoding="utf-8")
    assert main(["run", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "cli-demo" in out
    csvs = sorted(p for p in os.listdir(outdir) if p.endswith(".csv"))
    pngs = sorted(p for p in os.listdir(outdir) if p.endswith(".png"))
    assert csvs and pngs

    assert main(["converge", str(cfg_path), "--levels", "2"]) == 0
    out = capsys.readouterr().out
    assert "err_E" in out and "eoc" in out
    assert (outdir / "demo_eoc.csv").exists()
    assert (outdir / "demo_eoc.png").exists()


def test_cli_reports_errors(tmp_path, capsys):
    assert main(["mesh", "info", str(tmp_path / "missing.mesh")]) == 2
    assert "error:" in capsys.readouterr().err
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("[time]\nt_end = -3\n", encoding="utf-8")
    assert main(["run", str(bad_cfg)]) == 2


def test_eoc_text_and_csv_round_trip():
    table = run_cavity_convergence(kind=PARALLELOGRAM, levels=2, base=4,
                                   t_end=0.2)
    text = eoc_table_text(table)
    assert "reference:" in text and len(text.splitlines()) == 4
    buf = io.StringIO()
    write_eoc_csv(table, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "h,dofs,err_E,eoc_E,err_H_super,eoc_H"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert float(first[0]) == table.rows[0].h
    assert first[3] == ""  # no order for the first level


def test_render_functions(tmp_path):
    from maxlump.mesh import build_structured_quad_mesh
    from maxlump.report import render_convergence, render_field_snapshot
    mesh = build_structured_quad_mesh(3, 3)
    h = np.linspace(-1.0, 1.0, mesh.n_elements)
    png = tmp_path / "snap.png"
    render_field_snapshot(mesh, h, str(png), title="t = 0")
    assert png.stat().st_size > 1000
    table = EocTable(reference="demo")
    table.add(0.5, 100, 1e-2, 1e-3)
    table.add(0.25, 400, 5e-3, 2.6e-4)
    png2 = tmp_path / "eoc.png"
    render_convergence(table, str(png2))
    assert png2.stat().st_size > 1000
