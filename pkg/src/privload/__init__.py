"""Differentially private smart-meter aggregation and short-term load forecasting."""

from privload.errors import (
    AlignmentError,
    CoverageError,
    DomainError,
    OrderingError,
    ParseError,
)
from privload.privacy import (
    ComposedGuarantee,
    NoiseShare,
    PrivacyParams,
    compose_k_fold,
    epsilon_from_rho,
    epsilon_from_scale,
    rho_from_epsilon,
    sample_gamma_share,
    sample_laplace,
)
from privload.series import LoadSeries, TemperatureSeries

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ComposedGuarantee",
    "CoverageError",
    "DomainError",
    "LoadSeries",
    "NoiseShare",
    "OrderingError",
    "ParseError",
    "PrivacyParams",
    "TemperatureSeries",
    "compose_k_fold",
    "epsilon_from_rho",
    "epsilon_from_scale",
    "rho_from_epsilon",
    "sample_gamma_share",
    "sample_laplace",
]
