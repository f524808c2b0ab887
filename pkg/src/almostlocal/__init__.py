"""Geodesics between closed triangulated surfaces under almost-local metrics.

The weight ``Phi(Vol, TrL^2)`` scales the ``L^2`` metric pointwise by a
function of total surface area and squared mean curvature.  Geodesics are
computed by minimizing a discrete horizontal path energy over the
interior frames of a path with fixed endpoints.
"""

__version__ = "0.1.0"

from .diagnostics import (
    PathDiagnostics,
    analyze_path,
    bound_constants,
    g0_curvature_quadrature,
    momenta,
    swept_area_bounds,
)
from .errors import AlmostLocalError
from .estimator import ShapeGeodesic
from .geometry import VertexGeometry, compute_geometry, cotangent_mean_curvature
from .mesh import (
    ShapePath,
    Topology,
    TriMesh,
    build_combinatorics,
    make_icosphere,
    read_frames,
    read_mesh,
    write_frames,
    write_mesh,
)
from .metric import (
    G0,
    Combined,
    ConformalExp,
    ConformalPower,
    GAPower,
    MetricWeight,
    ScaleInvariant,
    evaluate,
    partials,
)
from .optimizer import SolveReport, SolverConfig, Termination, initialize_path, mean_radius, solve_geodesic
from .path_energy import EnergyBreakdown, gradient, objective, path_energy, penalty
from .sphere_analytics import (
    closed_form_radius,
    completeness,
    crossover_length,
    geodesic_radius,
    integrate_radius_ode,
    optimal_translation_radius,
    radius_ode_rhs,
    shrink_grow_energy,
    translation_energy,
)

__all__ = [
    "AlmostLocalError",
    "Combined",
    "ConformalExp",
    "ConformalPower",
    "EnergyBreakdown",
    "G0",
    "GAPower",
    "MetricWeight",
    "PathDiagnostics",
    "ScaleInvariant",
    "ShapeGeodesic",
    "ShapePath",
    "SolveReport",
    "SolverConfig",
    "Termination",
    "Topology",
    "TriMesh",
    "VertexGeometry",
    "analyze_path",
    "bound_constants",
    "build_combinatorics",
    "closed_form_radius",
    "completeness",
    "compute_geometry",
    "cotangent_mean_curvature",
    "crossover_length",
    "evaluate",
    "g0_curvature_quadrature",
    "geodesic_radius",
    "gradient",
    "initialize_path",
    "integrate_radius_ode",
    "make_icosphere",
    "mean_radius",
    "momenta",
    "objective",
    "optimal_translation_radius",
    "partials",
    "path_energy",
    "penalty",
    "radius_ode_rhs",
    "read_frames",
    "read_mesh",
    "shrink_grow_energy",
    "solve_geodesic",
    "swept_area_bounds",
    "translation_energy",
    "write_frames",
    "write_mesh",
]
