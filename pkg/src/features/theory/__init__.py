"""Numerical verification of the swap-loss identity on explicit linear models"""
from .families import GaussianImagePrior, OperatorFamily
from .identity import IdentityResult, convergence_study, mc_swap_identity, zero_estimator_expectation
from .oracle import FloorResult, OracleResult, linear_oracle, noise_floor_check

__all__ = [
    "FloorResult",
    "GaussianImagePrior",
    "IdentityResult",
    "OperatorFamily",
    "OracleResult",
    "convergence_study",
    "linear_oracle",
    "mc_swap_identity",
    "noise_floor_check",
    "zero_estimator_expectation",
]
