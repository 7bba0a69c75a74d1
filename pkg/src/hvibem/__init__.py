"""Interface problems with set-valued boundary friction, solved by
symmetric FEM/BEM coupling and smoothing regularization.

The top level re-exports the working surface: mesh generation, the
smoothed friction densities, interior/boundary assembly, the coupled
Newton solver, and the study harness under `hvibem.harness`.
"""

from ._kernels import backend_name
from .bem import (
    BoundaryOperatorSet,
    SteklovOperator,
    assemble_K,
    assemble_V,
    assemble_W,
    boundary_geometry,
    boundary_operator_set,
    build_steklov,
    l2_coercivity_constant,
    read_operator,
    reconstruct_exterior,
    write_operator,
)
from .fem import MaterialLaw, material_by_name, validate_material
from .mesh import (
    Mesh2D,
    MeshFormatError,
    build_polygon_mesh,
    dual_partition,
    read_mesh,
    refine_uniform,
    write_mesh,
)
from .smoothing import (
    SmoothingParams,
    SuperpotentialSpec,
    clarke_dirderiv,
    estimate_onesided_constant,
    linear,
    nonconvex,
    plus_smooth,
    superpotential_by_name,
    superpotential_slope,
    superpotential_value,
    tresca,
)
from .solver import (
    NewtonFailure,
    ProblemData,
    Solution,
    SolverConfig,
    assemble_system,
    solve_newton,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryOperatorSet",
    "MaterialLaw",
    "Mesh2D",
    "MeshFormatError",
    "NewtonFailure",
    "ProblemData",
    "SmoothingParams",
    "Solution",
    "SolverConfig",
    "SteklovOperator",
    "SuperpotentialSpec",
    "__version__",
    "assemble_K",
    "assemble_V",
    "assemble_W",
    "assemble_system",
    "backend_name",
    "boundary_geometry",
    "boundary_operator_set",
    "build_polygon_mesh",
    "build_steklov",
    "clarke_dirderiv",
    "dual_partition",
    "estimate_onesided_constant",
    "l2_coercivity_constant",
    "linear",
    "material_by_name",
    "nonconvex",
    "plus_smooth",
    "read_mesh",
    "read_operator",
    "reconstruct_exterior",
    "refine_uniform",
    "solve_newton",
    "superpotential_by_name",
    "superpotential_slope",
    "superpotential_value",
    "tresca",
    "validate_material",
    "write_mesh",
    "write_operator",
]
