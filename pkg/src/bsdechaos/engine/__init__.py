"""Backward solvers: exact trees and lattices, regression ensembles, additive systems."""

from .decompose import StepDecomposition, martingale_decompose, regression_decompose
from .picard import Backend, picard_iterate_mv, solve_mckean_vlasov, solve_mean_field
from .solution import PicardState, SolutionProcesses, residual_check, solution_json, zero_solution

__all__ = ["Backend", "PicardState", "SolutionProcesses", "StepDecomposition",
           "martingale_decompose", "regression_decompose", "picard_iterate_mv",
           "residual_check", "solution_json", "solve_mckean_vlasov", "solve_mean_field",
           "zero_solution"]
