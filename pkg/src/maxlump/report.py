"""Rendering of field snapshots and convergence reports.

Figures are written straight to files with the non-interactive Agg
backend; the delimited outputs (CSV, aligned text tables) live here as
well so the command line report path produces both side by side.
"""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt


def render_field_snapshot(mesh, h, path, title=""):
    """Color every element by its h value and save a PNG."""
    plt = _pyplot()
    from matplotlib.collections import PolyCollection

    polys = [mesh.element_coords(j) for j in range(mesh.n_elements)]
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    coll = PolyCollection(polys, array=np.asarray(h, dtype=float),
                          edgecolors="none", cmap="RdBu_r")
    vmax = float(np.max(np.abs(h))) if len(h) else 1.0
    if vmax == 0.0:
        vmax = 1.0
    coll.set_clim(-vmax, vmax)
    ax.add_collection(coll)
    ax.autoscale()
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.colorbar(coll, ax=ax, label="H")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_convergence(table, path):
    """Log-log error plot with first and second order guide lines."""
    plt = _pyplot()
    hs = np.array([row.h for row in table.rows])
    err_e = np.array([row.err_e for row in table.rows])
    err_h = np.array([row.err_h_super for row in table.rows])
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(hs, err_e, "o-", label="E error")
    ax.loglog(hs, err_h, "s-", label="H error (vs element means)")
    if len(hs) >= 2 and err_e[0] > 0 and err_h[0] > 0:
        ax.loglog(hs, err_e[0] * hs / hs[0], "k--", lw=0.8, label="order 1")
        ax.loglog(hs, err_h[0] * (hs / hs[0]) ** 2, "k:", lw=0.8,
                  label="order 2")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.set_title(table.reference, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def eoc_table_text(table):
    """Aligned text rendering of a convergence table."""
    lines = [f"reference: {table.reference}",
             f"{'h':>12} {'dofs':>8} {'err_E':>13} {'eoc_E':>7} "
             f"{'err_H_super':>13} {'eoc_H':>7}"]
    for row in table.rows:
        eoc_e = f"{row.eoc_e:7.2f}" if np.isfinite(row.eoc_e) else "     --"
        eoc_h = f"{row.eoc_h:7.2f}" if np.isfinite(row.eoc_h) else "     --"
        lines.append(f"{row.h:12.6g} {row.dofs:8d} {row.err_e:13.6e} "
                     f"{eoc_e} {row.err_h_super:13.6e} {eoc_h}")
    return "\n".join(lines)


def write_eoc_csv(table, stream):
    stream.write("h,dofs,err_E,eoc_E,err_H_super,eoc_H\n")
    for row in table.rows:
        eoc_e = f"{row.eoc_e:.17g}" if np.isfinite(row.eoc_e) else ""
        eoc_h = f"{row.eoc_h:.17g}" if np.isfinite(row.eoc_h) else ""
        stream.write(f"{row.h:.17g},{row.dofs},{row.err_e:.17g},{eoc_e},"
                     f"{row.err_h_super:.17g},{eoc_h}\n")
