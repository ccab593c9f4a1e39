"""Multi-step one-shot inversion for discretized linear inverse problems.

Solvers that iterate simultaneously on state, adjoint state and parameter,
together with their block iteration matrices, spectral convergence oracles,
explicit descent-step bounds, and the exact scalar-case stability theory.
"""
from .linear_model import (AssumptionReport, ComplexInverseProblem,
                           RealInverseProblem, ScalarProblem, exact_adjoint,
                           exact_state, fixed_point_state, helmholtz_toy,
                           load_problem, random_contraction, realify,
                           save_problem, validate)
from .solvers import (ConvergenceTrace, MethodSpec, SolverConfig, SolverKind,
                      Status, k_step_one_shot, run_method, shifted_gd,
                      shifted_k_step_one_shot, usual_gd)
from .spectral import (IterationMatrix, TUXTriple, build_iteration_matrix,
                       converges, eigenvalue_one_check, s_functional,
                       spectral_radius, tux)
from .bounds import (BoundParams, StepBound, chi_k, chi_k1, gd_bound,
                     matrix_bound, psi_k, psi_k1, shifted_gd_bound)
from .scalar import (CubicCoeffs, MardenTable, ScalarThreshold, eta, fk,
                     fk_roots, jury_marden_cubic, jury_marden_general, kappa,
                     scalar_iteration_matrix, shifted_gd_threshold,
                     usual_gd_threshold)

__all__ = [
    "AssumptionReport", "ComplexInverseProblem", "RealInverseProblem",
    "ScalarProblem", "exact_adjoint", "exact_state", "fixed_point_state",
    "helmholtz_toy", "load_problem", "random_contraction", "realify",
    "save_problem", "validate",
    "ConvergenceTrace", "MethodSpec", "SolverConfig", "SolverKind", "Status",
    "k_step_one_shot", "run_method", "shifted_gd", "shifted_k_step_one_shot",
    "usual_gd",
    "IterationMatrix", "TUXTriple", "build_iteration_matrix", "converges",
    "eigenvalue_one_check", "s_functional", "spectral_radius", "tux",
    "BoundParams", "StepBound", "chi_k", "chi_k1", "gd_bound", "matrix_bound",
    "psi_k", "psi_k1", "shifted_gd_bound",
    "CubicCoeffs", "MardenTable", "ScalarThreshold", "eta", "fk", "fk_roots",
    "jury_marden_cubic", "jury_marden_general", "kappa",
    "scalar_iteration_matrix", "shifted_gd_threshold", "usual_gd_threshold",
]
