"""Kernel-regularized impulse-response identification with orthonormal basis functions."""

from .basis import PoleSet, basis_impulse_matrix, basis_regressor, laguerre_poleset
from .benchmark import CollectionSpec, MethodConfig, fit_metric, run_benchmark
from .estimators import estimate_sigma2, ls, neg_log_marglik, rls
from .kernels import KernelSpec, kernel_matrix
from .lti import DataRecord, TransferFunction, impulse_response, random_system, simulate
from .methods import METHODS, TuningConfig, method_lslag, method_rfir, method_rlag, run_method

__version__ = "0.1.0"

__all__ = [
    "PoleSet", "basis_impulse_matrix", "basis_regressor", "laguerre_poleset",
    "CollectionSpec", "MethodConfig", "fit_metric", "run_benchmark",
    "estimate_sigma2", "ls", "neg_log_marglik", "rls",
    "KernelSpec", "kernel_matrix",
    "DataRecord", "TransferFunction", "impulse_response", "random_system", "simulate",
    "METHODS", "TuningConfig", "method_lslag", "method_rfir", "method_rlag", "run_method",
]
