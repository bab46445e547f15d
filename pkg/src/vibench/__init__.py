"""Solvers and a benchmark harness for monotone finite-sum variational
inequalities, with bilinear matrix games over simplices as the worked
problem family.

The hot solver loops run on a compiled kernel when the extension is built
and on a bit-identical pure-Python fallback otherwise; see
:func:`available_backends` and :func:`default_backend`.
"""

from ._backend import available_backends, default_backend
from .core import (CheckResult, FiniteSumProblem, LipschitzData,
                   ProxFriendlyFunction, SolverParams, VerificationReport,
                   make_minimization_problem, make_saddle_problem,
                   tune_params, verify_problem)
from .metrics import (OpAccount, game_duality_gap, gap_lower_witness,
                      residual_metric, slope_estimate)
from .problems import (GeneratorSpec, MatrixFormatError, MatrixGame,
                       PowerIterationError, component_lipschitz,
                       exact_small_game_solution, generate_matrix, load_matrix,
                       make_game, save_matrix, spectral_norm)
from .prox import (SimplexDomain, project_simplex, prox_indicator_product,
                   prox_residual, prox_zero, simplex_product_function,
                   zero_function)
from .rng import SplitMix64, derive_stream_seed, mix64
from .solvers import (CacheCoherenceError, DivergenceError, HookState,
                      SolverState, StepRecord, StopCriteria, delta_estimator,
                      extragradient_step, get_solver, init_state, list_solvers,
                      ommb_step, popov_step, register_solver, run_extragradient,
                      run_ommb, run_popov)
from .trace import CSV_HEADER, RunTrace, TraceRow

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER", "CacheCoherenceError", "CheckResult", "DivergenceError",
    "FiniteSumProblem", "GeneratorSpec", "HookState", "LipschitzData",
    "MatrixFormatError", "MatrixGame", "OpAccount", "PowerIterationError",
    "ProxFriendlyFunction", "RunTrace", "SimplexDomain", "SolverParams",
    "SolverState", "SplitMix64", "StepRecord", "StopCriteria", "TraceRow",
    "VerificationReport", "available_backends", "component_lipschitz",
    "default_backend", "delta_estimator", "derive_stream_seed",
    "exact_small_game_solution", "extragradient_step", "game_duality_gap",
    "gap_lower_witness", "generate_matrix", "get_solver", "init_state",
    "list_solvers", "load_matrix", "make_game",
    "make_minimization_problem", "make_saddle_problem",
    "mix64", "ommb_step", "popov_step", "project_simplex",
    "prox_indicator_product", "prox_residual", "prox_zero",
    "register_solver", "residual_metric", "run_extragradient", "run_ommb",
    "run_popov", "save_matrix", "simplex_product_function", "slope_estimate",
    "spectral_norm", "tune_params", "verify_problem", "zero_function",
]
