"""Quasi-static brittle fracture by eigenstrain relaxation.

Scalar antiplane elasticity on a structured triangulation; cracks grow
irreversibly where trading bulk energy for the area of a mesh-resolved
neighborhood of the broken set pays off.  Hot geometry kernels run
under numba when available, with a bitwise-matching numpy fallback
selected by the EIGENFRAC_JIT environment flag.
"""

from .energy import EnergyBreakdown, elastic_energy, total_energy
from .evolution import (EvolutionResult, InvariantViolation, RunSetup,
                        TimeGrid, evolve, verify_discrete_estimate,
                        verify_energy_balance)
from .fem import (BoundaryLoad, ElasticModel, SolverFailure, affine_ramp,
                  interpolate_boundary, optimal_gamma, shear_ramp,
                  solve_displacement, uniform_stretch)
from .geometry import (CrackSet, NeighborhoodLedger, cube_cover, good_set,
                       collar_disconnected, neighborhood_growth_check)
from .jit import JIT_ENABLED, set_thread_count
from .mesh import (DomainSpec, ResolutionCoupling, TriangulationMesh,
                   build_structured_mesh, couple_resolution)
from .minimizer import (ExhaustiveResult, MinimizeStrategy, StepResult,
                        exhaustive_minimize, minimize_step)

__version__ = "0.1.0"

__all__ = [
    "BoundaryLoad", "CrackSet", "DomainSpec", "ElasticModel",
    "EnergyBreakdown", "EvolutionResult", "ExhaustiveResult",
    "InvariantViolation", "JIT_ENABLED", "MinimizeStrategy",
    "NeighborhoodLedger", "ResolutionCoupling", "RunSetup", "SolverFailure",
    "StepResult", "TimeGrid", "TriangulationMesh", "affine_ramp",
    "build_structured_mesh", "collar_disconnected", "couple_resolution",
    "cube_cover", "elastic_energy", "evolve", "exhaustive_minimize",
    "good_set", "interpolate_boundary", "minimize_step",
    "neighborhood_growth_check", "optimal_gamma", "set_thread_count",
    "shear_ramp", "solve_displacement", "total_energy", "uniform_stretch",
    "verify_discrete_estimate", "verify_energy_balance",
]
