"""Grid-structured handwritten marksheet digitization."""

from gridscan.errors import (
    DegenerateGrid,
    DimMismatch,
    EmptyDataset,
    FormatError,
    ShapeMismatch,
    SpecError,
    UndefinedMetric,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateGrid",
    "DimMismatch",
    "EmptyDataset",
    "FormatError",
    "ShapeMismatch",
    "SpecError",
    "UndefinedMetric",
]
