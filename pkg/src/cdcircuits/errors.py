"""Exception types shared across the package."""

from __future__ import annotations


class CdCircuitsError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(CdCircuitsError, ValueError):
    """Axis pairing in a tensor contraction is inconsistent."""


class ValidationError(CdCircuitsError, ValueError):
    """Input violates a numerical precondition (Hermiticity, finiteness, normalization)."""


class ResourceError(CdCircuitsError, RuntimeError):
    """A configured size cap (term count, bond dimension, qubit count) was exceeded."""


class UndefinedMetricError(CdCircuitsError, ZeroDivisionError):
    """A normalized metric has a vanishing reference value."""


class DivergenceError(CdCircuitsError, RuntimeError):
    """An iterative solver increased its objective beyond tolerance."""
