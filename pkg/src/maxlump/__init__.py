"""2D transverse-electric Maxwell solver with block-lumped edge elements.

The package discretizes the first-order E/H system on conforming
triangle/parallelogram meshes with lowest-order edge elements whose
mass matrix inverse is sparse by construction, steps it explicitly with
a staggered leapfrog, and reduces exactly to the classical staggered
finite difference scheme on uniform orthogonal grids.
"""

__version__ = "0.1.0"

from .assembly import (
    DofMap,
    MaterialField,
    assemble_all,
    assemble_curl,
    assemble_lumped_mass_e,
    assemble_mass_h,
    assemble_split_curl,
    assemble_stiffness,
    build_inverse_mass_e,
    build_projection,
)
from .benchmarks import (
    CavityMode,
    EocTable,
    cavity_mode,
    element_means,
    error_norms,
    interpolate_edge_circulations,
    run_cavity_convergence,
    verify_yee_equivalence,
)
from .config import ConfigError, SimConfig, load_config, parse_config
from .linalg import (
    AssemblyDegeneracyError,
    DiagonalMatrix,
    IterationError,
    SparseMatrix,
    VertexBlockMatrix,
    conjugate_gradient,
    invert_blocks,
    power_iteration_max_eig,
    spmv,
    triple_product,
)
from .mesh import (
    AffineMap,
    Mesh,
    MeshFormatError,
    MeshValidationError,
    affine_map,
    build_structured_hybrid_mesh,
    build_structured_quad_mesh,
    build_structured_tri_mesh,
    read_mesh,
    read_mesh_file,
    refine_uniform,
    refine_uniform_with_map,
    write_mesh,
    write_mesh_file,
)
from .scenario import (
    build_scatter_disk_mesh,
    export_snapshot,
    run_scenario,
    scattering_scenario,
)
from .stepping import (
    BlowUpError,
    FieldState,
    SourceTerm,
    discrete_energy,
    estimate_cfl,
    leapfrog_step,
    run_leapfrog,
    run_split_leapfrog,
    second_order_step,
)
from .yee import yee_reference_run, yee_step
