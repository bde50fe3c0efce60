"""Exception taxonomy shared by every stage of the pricing pipeline.

The split mirrors how the command line maps failures to exit codes:
data problems (schema, parse, validation, singular designs) are
distinguished from fitting problems (non-convergence, divergence,
numeric blow-ups).
"""

from __future__ import annotations


class PricelabError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(PricelabError):
    """CSV header does not match the expected column contract."""


class ParseError(PricelabError):
    """A data cell could not be parsed; message carries the row number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ValidationError(PricelabError):
    """A value violates a documented invariant (record field, config, split)."""


class SingularityError(PricelabError):
    """Design matrix is rank deficient or underdetermined.

    ``columns`` names the dependent columns when they could be identified.
    """

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        super().__init__(message)
        self.columns = columns


class ConvergenceError(PricelabError):
    """An iterative fit ran out of iterations; carries the last trajectory."""

    def __init__(self, message: str, trajectory: tuple[float, ...] = ()):
        super().__init__(message)
        self.trajectory = trajectory


class DivergenceError(PricelabError):
    """Training loss exploded; the message suggests a smaller learning rate."""


class NumericError(PricelabError):
    """A non-finite value appeared; message carries the epoch or step index."""
