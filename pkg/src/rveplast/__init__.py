"""Periodic-RVE simulation of random elastoplastic spring networks.

The triangular spring network on a periodic cell defines, for every
realization of random spring parameters, a rate-independent hysteresis
operator from macroscopic strain paths to averaged stresses.  This
package samples realizations reproducibly, solves the nonsmooth convex
time increments, and runs the Monte-Carlo studies of how the cell-size
errors scale.
"""

from .assembly import (
    DofMap,
    IncrementProblem,
    RveState,
    assemble_load,
    assemble_operator,
    build_increment,
    corner_nodes,
    increment_energy,
)
from .driver import (
    PathError,
    StrainPath,
    StressRecord,
    cyclic_path,
    monotonic_path,
    plastic_fraction,
    run_path,
    stress_vector,
)
from .lattice import (
    EDGE_TYPES,
    EdgeType,
    PeriodicLattice,
    SymTensor2,
    projected_edge_derivative,
    ps_adjoint,
    ps_map,
    wrap_node,
)
from .randfield import ConfigError, MaterialLaw, Realization, restrict, sample
from .reference import SpringParams, brute_force_increment, return_map, spring_trajectory
from .solver import (
    SolveReport,
    SolverError,
    SolverSettings,
    gauss_seidel_sweep,
    optimality_residual,
    scalar_prox,
    solve_increment,
    truncated_newton_correction,
)
from .stats import (
    ErrorTable,
    McEnsemble,
    SlopeFit,
    loglog_slope,
    monte_carlo,
    numerical_slope,
    sample_variance,
    systematic_error_study,
)

__version__ = "0.1.0"
