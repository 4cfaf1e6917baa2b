#!/usr/bin/env python3
"""
Custom exceptions for gdd-insight
Provides specific exception types for better error handling and debugging
"""

from typing import List, Optional


class GddError(Exception):
    """Base exception class for gdd-insight"""

    def __init__(self, message: str, *, context: Optional[str] = None):
        self.context = context
        self.message = message
        super().__init__(f"[{context}] {message}" if context else message)


class ConfigurationError(GddError):
    """Raised when configuration is invalid or missing"""
    pass


class ScenarioError(GddError):
    """Raised when a scenario violates its dimension or probability bounds"""

    def __init__(self, errors: List[str], *, context: Optional[str] = "model"):
        self.errors = list(errors)
        super().__init__("invalid scenario: " + "; ".join(self.errors), context=context)


class DomainError(GddError):
    """Raised when an argument lies outside the domain of an operation"""
    pass


class NumericalError(GddError):
    """Raised when a numerical operation produces or receives unusable values"""
    pass


class NotPositiveDefiniteError(NumericalError):
    """Raised when a Cholesky factorization breaks down"""

    def __init__(self, pivot: int, *, context: Optional[str] = "matrix_core"):
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite (leading minor of order {pivot} failed)",
            context=context,
        )


class RankError(NumericalError):
    """Raised when a matrix that must have full rank does not"""
    pass


class ConvergenceError(NumericalError):
    """Raised when an iterative or adaptive procedure fails to converge"""
    pass


class CalibrationError(GddError):
    """Raised when Monte Carlo threshold calibration cannot be performed"""
    pass


class ExportError(GddError):
    """Raised when report export operations fail"""
    pass
