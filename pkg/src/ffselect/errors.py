"""Exception hierarchy.

Every library error derives from :class:`FfselectError` and carries a stable
``exit_code`` so the command line interface can map failures to distinct
process exit statuses (2 is reserved for usage/configuration problems, 5 for
I/O, 1 for unexpected internal errors).
"""


class FfselectError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(FfselectError):
    """Invalid option value or inconsistent configuration."""

    exit_code = 2


class NonFinite(FfselectError):
    """An array that must be finite contains NaN or infinity."""

    exit_code = 10


class ShapeMismatch(FfselectError):
    """Array dimensions do not line up."""

    exit_code = 11


class TooSmall(FfselectError):
    """Panel has too few rows or columns to be processed."""

    exit_code = 12


class DegenerateU(FfselectError):
    """Covariate has zero spread, no bandwidth can be formed."""

    exit_code = 13


class BandwidthTooSmall(FfselectError):
    """Some evaluation point has an ill-posed local-linear fit."""

    exit_code = 14


class NotSymmetric(FfselectError):
    """Matrix handed to the eigensolver is not symmetric."""

    exit_code = 15


class NumericalFailure(FfselectError):
    """Linear algebra routine failed to converge."""

    exit_code = 16


class OrderOutOfRange(FfselectError):
    """Requested number of factors is outside the valid range."""

    exit_code = 17


class BootstrapDegenerate(FfselectError):
    """Bootstrap resampling could not produce a usable replicate."""

    exit_code = 18


class ZeroLoadingColumn(FfselectError):
    """Every leave-one-out regression at some step had a zero regressor."""

    exit_code = 19


class FoldTooSmall(FfselectError):
    """Cross-validation folds leave too few rows for estimation."""

    exit_code = 20


class CholeskyFailure(FfselectError):
    """Covariance matrix for error simulation is not positive definite."""

    exit_code = 21


class MissingColumn(FfselectError):
    """A required column is absent from the input file."""

    exit_code = 22


class NonPositiveUForLog(FfselectError):
    """Log transform requested but the covariate has values <= 0."""

    exit_code = 23


class TooFewRows(FfselectError):
    """Fewer than three usable rows remain after filtering."""

    exit_code = 24


class ParseError(FfselectError):
    """A cell could not be parsed as a number or date."""

    exit_code = 25


class ReplicationBudgetExceeded(FfselectError):
    """Too many replications of a simulation cell failed."""

    exit_code = 26
