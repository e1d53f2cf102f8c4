"""Closed-form mutual information for Dirichlet predictive distributions.

Special functions, Dirichlet utilities, analytic and Monte-Carlo uncertainty
measures, Minka fixed-point estimation, an MC-dropout classifier and a
pool-based active-learning loop.
"""

from .dirichlet import DirichletParams, SampleBatch
from .estimation import (
    DegenerateError,
    EstimationConfig,
    EstimationResult,
    StatisticMode,
    fixed_point_estimate,
)
from .specfun import DomainError
from .uncertainty import (
    UncertaintyReport,
    analytic_aleatoric,
    analytic_mutual_information,
    baba,
    empirical_aleatoric,
    empirical_bald,
    janossy_joint_entropy,
    mjent,
    predictive_entropy,
    report,
)

__version__ = "0.1.0"

__all__ = [
    "DirichletParams",
    "SampleBatch",
    "DomainError",
    "DegenerateError",
    "EstimationConfig",
    "EstimationResult",
    "StatisticMode",
    "fixed_point_estimate",
    "UncertaintyReport",
    "analytic_aleatoric",
    "analytic_mutual_information",
    "baba",
    "empirical_aleatoric",
    "empirical_bald",
    "janossy_joint_entropy",
    "mjent",
    "predictive_entropy",
    "report",
]
