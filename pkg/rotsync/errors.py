#!/usr/bin/env python3

"""
Exceptions raised by :mod:`rotsync`.

All of them derive from :class:`RotSyncError`. Each class carries an
`exit_code` attribute which the command line front end
(:mod:`rotsync.cli`) uses as the process exit status.
"""


class RotSyncError(Exception):
    """
    Base class for all the :mod:`rotsync` errors.
    """
    exit_code = 1


class InvalidInputError(RotSyncError, ValueError):
    """
    Dimension mismatch, non-finite coordinates, mismatching histogram
    layouts or a malformed set descriptor.
    """
    exit_code = 1


class InvalidConfigError(InvalidInputError):
    """
    An experiment configuration did not pass validation.
    """
    exit_code = 1


class UnrepresentableDepthError(InvalidInputError):
    """
    A Cantor approximant was requested at a depth whose removal length
    underflows double precision or does not fit in the current arcs.
    """
    exit_code = 1


class CapacityError(RotSyncError):
    """
    A computation outgrew a configured cap. The partial result computed
    so far is available as :attr:`partial` and the step at which the
    cap was hit as :attr:`step`.
    """
    exit_code = 2

    def __init__(self, message, partial=None, step=None):
        super().__init__(message)
        self.partial = partial
        self.step = step


class StatisticalPreconditionError(RotSyncError):
    """
    Base class for errors raised when a statistical procedure cannot be
    applied to its input.
    """
    exit_code = 3


class DegenerateFitError(StatisticalPreconditionError):
    """
    All the near-zero displacement values are numerically zero, so no
    power law can be fitted (a translational symmetry is likely).
    """


class NotIntegrableError(StatisticalPreconditionError):
    """
    The reciprocal of the displacement function is not integrable, so
    the normalization constant and the stationary density do not exist.
    """


class InvalidProbabilityError(StatisticalPreconditionError):
    """
    A displacement provider returned a value outside [0, 1].
    """


class UnderpoweredTestError(StatisticalPreconditionError):
    """
    A statistical test was requested with too few trials to be
    meaningful.
    """
