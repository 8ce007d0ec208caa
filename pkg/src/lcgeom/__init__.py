"""Monte-Carlo and quadrature experiments on log-concave and s-concave measures."""

from ._accel import backend
from .distributions import DistributionSpec, family_spec, sample
from .errors import (BudgetExhausted, CertificateViolation, ConfigError, LcgeomError,
                     MomentNotExistError, NonConvergenceError)
from .numerics import RngStream

__all__ = [
    "BudgetExhausted", "CertificateViolation", "ConfigError", "DistributionSpec", "LcgeomError",
    "MomentNotExistError", "NonConvergenceError", "RngStream", "backend", "family_spec", "sample",
]
