#!/usr/bin/env python
# coding: utf-8

"""
Error types shared by the galloping prediction modules.

Every failure the command line reports as a domain error derives from
GallopingError; argument mistakes stay with argparse.
"""

from typing import Optional


class GallopingError(Exception):
    """Base class for domain errors (CLI exit status 1)."""


class ConfigError(GallopingError):
    """Invalid configuration parameter or flat config file."""


class DataFormatError(GallopingError):
    """
    Malformed dataset file.

    Args:
        message: Description of the problem
        row: 1-based line number in the file (header is line 1)
        column: Column name involved, if any
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"line {row}")
        if column is not None:
            location.append(f"column '{column}'")
        full_message = f"{message} ({', '.join(location)})" if location else message
        super().__init__(full_message)
        self.row = row
        self.column = column


class DatasetError(GallopingError):
    """Dataset-level precondition failure (size, classes, variance)."""


class SynthesisError(GallopingError):
    """Invalid generator configuration or infeasible generation."""


class ModelFormatError(GallopingError):
    """Model file with a wrong schema, version or invariant."""


class ConvergenceError(GallopingError):
    """
    SMO stopped before the KKT conditions were met.

    Attributes:
        model: Best model reached when the solver stopped
        violations: Number of training points violating KKT at that point
    """

    def __init__(self, message: str, model=None, violations: int = 0):
        super().__init__(message)
        self.model = model
        self.violations = violations


class SamplingError(GallopingError):
    """Invalid sampling strategy or class too small to resample."""


class InsufficientDataError(GallopingError):
    """Experiment source does not hold enough samples for a cell."""
