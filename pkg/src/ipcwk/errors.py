"""
Module for the ipcwk exception hierarchy.

Every exception carries the exit code the command line surface reports for it.
"""


class IpcwkError(Exception):
    """
    Base class for all errors raised by ipcwk.

    Attributes
    ----------
    exit_code : int
        The process exit code associated with this class of error.
    """

    exit_code = 1

    def as_dict(self):
        """
        Machine readable form of the error, as emitted by the command line surface.

        Returns
        -------
        dict
            A dict with the error type, message and exit code.
        """
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class ConfigError(IpcwkError):
    """
    Invalid parameters or configuration.
    """

    exit_code = 2


class DimensionMismatchError(ConfigError, ValueError):
    """
    A point or dataset does not have the dimension the kernel was built for.
    """


class DataIOError(IpcwkError):
    """
    A file could not be read or written.
    """

    exit_code = 3


class DatasetFormatError(DataIOError):
    """
    A dataset file is malformed.

    Attributes
    ----------
    line : int
        The 1-based line number of the offending line, or None if the problem is not tied to a line.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

    def as_dict(self):
        ret = super().as_dict()
        ret["line"] = self.line
        return ret


class NumericError(IpcwkError):
    """
    A numerically degenerate situation was encountered.
    """

    exit_code = 4


class EmptyWindowError(NumericError):
    """
    No covariate lies within the kernel window around the evaluation point. The bandwidth is too small at that point.
    """


class DegenerateDenominatorError(NumericError):
    """
    The conditional distribution function estimate is too close to one for a hazard ratio to be formed.
    """


class ZeroDensityError(NumericError):
    """
    The design density estimate is not positive at the evaluation point.
    """


class AllPointsMissingError(NumericError):
    """
    Every point of an evaluation grid was skipped.
    """


class MonteCarloError(NumericError):
    """
    A Monte Carlo estimate could not be formed.
    """
