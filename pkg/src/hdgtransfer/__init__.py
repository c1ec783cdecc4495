"""Unfitted HDG solver for 2D linear elasticity with weakly imposed stress
symmetry and Dirichlet data transferred from a curved boundary."""

from .errors import (AssemblyError, ConfigurationError, GeometryError, HdgError, InvalidParameterError,
                     MeshGenerationError, NoIntersectionError, PathConstructionError, PreconditionError,
                     SolverError)
from .geometry import geometry_by_name, kidney, unit_disk, unit_square
from .hdg import HdgConfig, HdgProblem, solve_monolithic, solve_problem
from .material import MaterialParams, lame_from_E_nu
from .meshgen import Mesh, build_fitted_disk_mesh, build_immersed_mesh, build_square_mesh
from .spaces import space_tables
from .study import StudyConfig, manufactured_catalog, parse_config, run_convergence
from .transfer import build_paths

__version__ = "0.1.0"
