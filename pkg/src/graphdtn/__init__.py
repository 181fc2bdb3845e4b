"""p-Laplacian Dirichlet and Neumann problems on metric measure graphs.

Besov boundary seminorms, trace and extension norms, and the nonlinear
Dirichlet-to-Neumann and Neumann-to-Dirichlet maps with their norm bounds.
"""
from .besov import (BesovKernel, FunctionalError, besov_energy, besov_kernel,
                    besov_seminorm, dual_norm)
from .config import SolverConfig
from .diagnostics import codimension_fit, doubling_constant, fit_codimension, poincare_constant
from .dtn import (NormReport, bounds_report, c_p, dtn_apply, dtn_norm, ntd_apply, ntd_norm,
                  roundtrip_check)
from .generators import generate
from .graph import (BesovParams, GraphError, MetricMeasureGraph, ball_measure,
                    shortest_path_distances, validate)
from .io import emit_report, load_graph
from .sobolev import (capacity_p, extension_norm, p_energy, p_laplacian, pairing,
                      trace_norm)
from .solvers import (SolverError, brute_force_minimize, el_residual, energy_bound_checks,
                      solve_dirichlet, solve_neumann)

__all__ = [
    "BesovKernel", "BesovParams", "FunctionalError", "GraphError", "MetricMeasureGraph",
    "NormReport", "SolverConfig", "SolverError", "ball_measure", "besov_energy",
    "besov_kernel", "besov_seminorm", "bounds_report", "brute_force_minimize", "c_p",
    "capacity_p", "codimension_fit", "doubling_constant", "dtn_apply", "dtn_norm",
    "dual_norm", "el_residual", "emit_report", "energy_bound_checks", "extension_norm",
    "fit_codimension", "generate", "load_graph", "ntd_apply", "ntd_norm", "p_energy",
    "p_laplacian", "pairing", "poincare_constant", "roundtrip_check",
    "shortest_path_distances", "solve_dirichlet", "solve_neumann", "trace_norm", "validate",
]
