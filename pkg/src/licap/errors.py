"""Exception types shared across the package."""


class LicapError(Exception):
    """Base class for errors raised by this package."""


class ParseError(LicapError):
    """A data file violated its format contract."""


class DataError(LicapError):
    """Inputs were well-formed but semantically invalid (unknown node, ...)."""


class TrainingDiverged(LicapError):
    """A training loop produced a non-finite loss or gradient."""


class ConvergenceError(LicapError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
