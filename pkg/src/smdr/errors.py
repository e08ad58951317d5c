"""Exception types shared across the package."""


class SmdrError(Exception):
    """Base class for package-specific failures."""


class DataFormatError(SmdrError):
    """Malformed or inconsistent input data (files, headers, dimensions)."""


class NumericalError(SmdrError):
    """A computation produced an unusable numerical result."""


class InvalidDensityError(NumericalError):
    """Both mixture components vanish at an observed statistic."""


class NonNormalizableDensityError(NumericalError):
    """An estimated density is too far from integrating to one."""


class DegeneratePosteriorError(NumericalError):
    """Screening cannot proceed because the posterior signal mass is zero."""


class DegenerateSelectionError(NumericalError):
    """A procedure cannot reach its control level on the given field."""
