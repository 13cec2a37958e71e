"""
Error types for privcode.

Every error derives from PrivcodeError, which is itself a ValueError, so callers
that only care about bad input can keep catching ValueError.
"""

from typing import List, Optional


class PrivcodeError(ValueError):
    """Base class for all privcode errors."""


class NoInverseError(PrivcodeError):
    """Raised when inverting zero in a prime field."""


class InsufficientPointsError(PrivcodeError):
    """Raised when the field has too few nonzero elements to sample from."""


class SingularSystemError(PrivcodeError):
    """Raised when interpolation points repeat or a decode cross-check fails."""


class ShapeError(PrivcodeError):
    """Raised on matrix dimension mismatches."""


class PartitionError(PrivcodeError):
    """Raised when a dimension is not divisible by the requested block count."""


class InsufficientResultsError(PrivcodeError):
    """
    Raised when a group delivers fewer than m sub-computation results.

    Args:
        message: Human-readable description.
        group_index: 1-based index of the starved group, if known.
    """

    def __init__(self, message: str, group_index: Optional[int] = None):
        super().__init__(message)
        self.group_index = group_index


class InvalidSpecError(PrivcodeError):
    """
    Raised when a configuration violates a partitioning invariant.

    Args:
        violations: The violated inequalities, e.g. ["L·N/n ≥ m (got 4 < 100)"].
    """

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid spec: " + "; ".join(self.violations))


class DivergentOrderStatError(PrivcodeError):
    """Raised when a log-convention order statistic is evaluated at k = N."""


class InfeasibleGroupingError(PrivcodeError):
    """Raised when a group is too small to deliver m one-shot results."""
