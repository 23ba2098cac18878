"""Exception hierarchy for codasep.

ValidationError covers bad user input (malformed files, inconsistent
dimensions, out-of-range parameters) and maps to CLI exit code 1.
Everything else raised by the library derives from CodasepError and
maps to exit code 2.
"""

from __future__ import annotations


class CodasepError(Exception):
    """Base class for all codasep errors."""


class ValidationError(CodasepError):
    """Invalid input data or configuration."""


class DataFormatError(ValidationError):
    """A delimited input file could not be parsed."""


class MemoryBudgetError(CodasepError):
    """Dense materialization refused because it exceeds the configured cap."""


class ConvergenceError(CodasepError):
    """An iterative procedure failed in a way that cannot be neutralized."""
