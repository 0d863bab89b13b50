"""High-order DG on vertex-mapped pyramids with a semi-nodal orthogonal basis."""

__version__ = "0.1.0"

from .dg import DGContext, DGState, WaveMaterial, advection_rhs, lsrk4_step, wave_rhs  # noqa: E402
from .geometry import VertexMappedPyramid, warped_pyramid  # noqa: E402
from .massops import chebyshev_solve, diag_mass, eig_bounds, project  # noqa: E402
from .mesh import build_mesh, connect_faces  # noqa: E402
from .refelem import build_operator_set, seminodal_basis  # noqa: E402

__all__ = [
    "DGContext", "DGState", "WaveMaterial", "advection_rhs", "lsrk4_step", "wave_rhs",
    "VertexMappedPyramid", "warped_pyramid", "chebyshev_solve", "diag_mass", "eig_bounds", "project",
    "build_mesh", "connect_faces", "build_operator_set", "seminodal_basis",
]
