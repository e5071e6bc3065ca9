"""Exception types shared across the package.

I/O failures surface as the builtin ``OSError``; bad arguments as ``ValueError``
or one of the subclasses below.
"""


class FormatError(ValueError):
    """A file exists but its contents cannot be decoded."""


class DimMismatch(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class DegenerateGrid(ValueError):
    """Fewer than two row or column lines were found."""


class EmptyDataset(ValueError):
    pass


class SpecError(ValueError):
    pass


class UndefinedMetric(ValueError):
    """A metric's denominator is zero."""
