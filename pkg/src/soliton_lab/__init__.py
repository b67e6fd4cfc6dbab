"""Translating solitons on rotationally symmetric and pinched Cartan-Hadamard models.

Modules
-------
manifold     curvature profiles, warping functions (Jacobi solves), 2D metrics
radial       bowl profiles, their asymptotics, bounded radial subsolutions
barriers     hypothesis checkers and barrier construction for the 2D metrics
disk_solver  Dirichlet and capillary problems on geodesic disks
cli          config-driven command-line front end
"""
from .barriers import (AssemblyError, GeometryError, HypothesisError, adp_conditions,
                       assemble_global_barriers, difference_bound, lemma26_check, v_sequence)
from .disk_solver import (CapillaryResult, GridField, SolverFailure, comparison_check,
                          continuation_C, exhaustion_solve, find_phi_for_target_C, solve_capillary,
                          solve_dirichlet)
from .manifold import (CurvatureProfile, SurfaceMetric2D, get_metric, get_profile, get_warping,
                       solve_jacobi)
from .radial import RadialProfile, asymptotic_report, bounded_height, check_prop8_conditions, integrate_bowl
from .reports import SCHEMA_VERSION, ConditionReport, ConditionResult

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "CapillaryResult", "ConditionReport", "ConditionResult", "CurvatureProfile",
    "GeometryError", "GridField", "HypothesisError", "RadialProfile", "SCHEMA_VERSION",
    "SolverFailure", "SurfaceMetric2D", "adp_conditions", "assemble_global_barriers",
    "asymptotic_report", "bounded_height", "check_prop8_conditions", "comparison_check",
    "continuation_C", "difference_bound", "exhaustion_solve", "find_phi_for_target_C",
    "get_metric", "get_profile", "get_warping", "integrate_bowl", "lemma26_check",
    "solve_capillary", "solve_dirichlet", "solve_jacobi", "v_sequence",
]
