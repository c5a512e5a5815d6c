"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: configuration problems,
data/input problems, and solver non-convergence are kept separate so
scripted callers can tell them apart.
"""


class SvdClassifyError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SvdClassifyError):
    """Invalid run configuration (flags, ranges, norms, fractions)."""


class DataError(SvdClassifyError):
    """Problem with input data (images, datasets, model files)."""


class DecodeError(DataError):
    """A byte stream claiming to be an image could not be decoded."""


class UnsupportedFormatError(DataError):
    """The byte stream is not one of the supported image formats."""


class DatasetError(DataError):
    """A dataset directory or split violates the two-class layout."""


class ModelFormatError(DataError):
    """A model file is malformed, version-mismatched, or inconsistent."""


class ConvergenceError(SvdClassifyError):
    """The weight optimizer failed to reach its convergence criteria."""
