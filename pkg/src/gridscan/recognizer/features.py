"""Cell crop -> normalized 32x32 classifier input."""

from __future__ import annotations

import numpy as np

from gridscan.imaging import adaptive_threshold, resize

INPUT_SIZE = 32
# glyph occupies the central 28x28, as in MNIST-style digit sets
CONTENT_SIZE = 28


def strip_border_lines(ink: np.ndarray, band: float = 0.15, fill: float = 0.5) -> np.ndarray:
    """Clear rows/columns near the crop border that are mostly ink.

    Residual grid line pixels end up as near-solid stripes along the crop edge;
    handwriting rarely fills half a row or column that close to the edge.
    """
    ink = ink.copy()
    h, w = ink.shape
    by, bx = max(2, int(round(band * h))), max(2, int(round(band * w)))
    row_fill = ink.mean(axis=1)
    col_fill = ink.mean(axis=0)
    for r in list(range(min(by, h))) + list(range(max(0, h - by), h)):
        if row_fill[r] >= fill:
            ink[r, :] = False
    for c in list(range(min(bx, w))) + list(range(max(0, w - bx), w)):
        if col_fill[c] >= fill:
            ink[:, c] = False
    return ink


def cell_ink(cell: np.ndarray, block: int = 15, c: float = 8) -> np.ndarray:
    """Binarize a gray cell crop and drop residual grid-line stripes."""
    if cell.size == 0:
        return np.zeros(cell.shape, dtype=bool)
    return strip_border_lines(adaptive_threshold(cell, block, c))


def ink_fraction(ink: np.ndarray) -> float:
    return float(ink.mean()) if ink.size else 0.0


def normalize_ink(ink: np.ndarray, size: int = INPUT_SIZE, content: int = CONTENT_SIZE) -> np.ndarray:
    """Crop to the ink bbox, pad to a centered square, resample to ``size``.

    Returns float32 ``(size, size)`` in [0, 1]; an inkless mask gives zeros.
    """
    ys, xs = np.nonzero(ink)
    out = np.zeros((size, size), dtype=np.float32)
    if len(ys) == 0:
        return out
    crop = ink[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
    h, w = crop.shape
    side = max(h, w)
    square = np.zeros((side, side), dtype=np.uint8)
    oy, ox = (side - h) // 2, (side - w) // 2
    square[oy : oy + h, ox : ox + w] = crop.astype(np.uint8) * 255
    scaled = resize(square, content, content)
    off = (size - content) // 2
    out[off : off + content, off : off + content] = scaled / np.float32(255)
    return out


def cell_input(cell: np.ndarray, block: int = 15, c: float = 8) -> tuple[np.ndarray, float]:
    """``(normalized 32x32 input, ink fraction)`` for one gray cell crop."""
    ink = cell_ink(cell, block, c)
    return normalize_ink(ink), ink_fraction(ink)
