"""Table structure recovery from the opened line masks."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from gridscan.errors import DegenerateGrid
from gridscan.imaging import save_image

RED = (255, 0, 0)
GREEN = (0, 255, 0)


@dataclass(frozen=True)
class Component:
    x: int
    y: int
    w: int
    h: int
    area: int

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h


@dataclass(frozen=True)
class GridModel:
    col_xs: tuple[int, ...]
    row_ys: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return len(self.row_ys) - 1

    @property
    def n_cols(self) -> int:
        return len(self.col_xs) - 1

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def scaled(self, sx: float, sy: float) -> "GridModel":
        """Map positions into another frame, e.g. back from the 1000x1000 working canvas."""
        return GridModel(
            tuple(int(round(x * sx)) for x in self.col_xs),
            tuple(int(round(y * sy)) for y in self.row_ys),
        )


@dataclass(frozen=True)
class CellRegion:
    row: int
    col: int
    image: np.ndarray


def connected_components(mask: np.ndarray) -> list[Component]:
    """8-connected components with tight bboxes, sorted by bbox origin (y, x)."""
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        ys, xs = sl
        comps.append(Component(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start, int(areas[i])))
    comps.sort(key=lambda c: (c.y, c.x))
    return comps


def _filter_extent(extents: list[int], min_len: int, min_span_frac: float) -> list[bool]:
    if not extents:
        return []
    longest = max(extents)
    return [e >= min_len and e >= min_span_frac * longest for e in extents]


def column_positions(vert_mask: np.ndarray, min_len: int = 30, min_span_frac: float = 0.5) -> list[int]:
    """Sorted left edges of vertical line components.

    A component counts as a line when its height is at least ``min_len`` and at
    least ``min_span_frac`` of the tallest component; the latter drops tall
    handwriting strokes that survive the opening.
    """
    comps = connected_components(vert_mask)
    keep = _filter_extent([c.h for c in comps], min_len, min_span_frac)
    return sorted(c.x for c, k in zip(comps, keep) if k)


def row_positions(horiz_mask: np.ndarray, min_len: int = 30, min_span_frac: float = 0.5) -> list[int]:
    """Sorted top edges of horizontal line components (see :func:`column_positions`)."""
    comps = connected_components(horiz_mask)
    keep = _filter_extent([c.w for c in comps], min_len, min_span_frac)
    return sorted(c.y for c, k in zip(comps, keep) if k)


def group_positions(xs: Sequence[int], min_gap: int = 30) -> list[int]:
    """Greedy left-to-right dedup: keep a position iff it is more than
    ``min_gap`` past the last kept one."""
    xs = list(xs)
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ValueError("positions must be sorted ascending")
    out: list[int] = []
    for x in xs:
        if not out or x - out[-1] > min_gap:
            out.append(x)
    return out


def build_grid(col_xs: Sequence[int], row_ys: Sequence[int]) -> GridModel:
    if len(col_xs) < 2 or len(row_ys) < 2:
        raise DegenerateGrid(f"need at least 2 columns and 2 rows, got {len(col_xs)} and {len(row_ys)}")
    return GridModel(tuple(int(x) for x in col_xs), tuple(int(y) for y in row_ys))


def cell_rect(grid: GridModel, row: int, col: int, inset: int = 2) -> tuple[int, int, int, int]:
    """``(x0, y0, x1, y1)`` half-open rectangle of one cell after the inset.

    The inset is clamped so every rectangle keeps at least one pixel.
    """
    x0, x1 = grid.col_xs[col], grid.col_xs[col + 1]
    y0, y1 = grid.row_ys[row], grid.row_ys[row + 1]
    ix = max(0, min(inset, (x1 - x0 - 1) // 2))
    iy = max(0, min(inset, (y1 - y0 - 1) // 2))
    return x0 + ix, y0 + iy, x1 - ix, y1 - iy


def extract_cells(img: np.ndarray, grid: GridModel, inset: int = 2) -> list[CellRegion]:
    """Row-major crops of every cell of ``grid``."""
    if grid.n_rows < 1 or grid.n_cols < 1:
        raise DegenerateGrid("grid has no cells")
    h, w = img.shape[:2]
    if grid.col_xs[0] < 0 or grid.row_ys[0] < 0 or grid.col_xs[-1] > w or grid.row_ys[-1] > h:
        raise ValueError("grid lies outside the image")
    cells = []
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            x0, y0, x1, y1 = cell_rect(grid, r, c, inset)
            cells.append(CellRegion(r, c, img[y0:y1, x0:x1].copy()))
    return cells


def cell_filename(row: int, col: int) -> str:
    return f"cell_{row}_{col}.pgm"


def save_cells(cells: Sequence[CellRegion], directory: str | os.PathLike) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for cell in cells:
        save_image(cell.image, d / cell_filename(cell.row, cell.col))


def render_overlay(img: np.ndarray, grid: GridModel) -> np.ndarray:
    """Gray replicated to RGB with red column lines and green row lines on top."""
    out = np.repeat(img[:, :, None], 3, axis=2)
    h, w = img.shape
    for x in grid.col_xs:
        if 0 <= x < w:
            out[:, x] = RED
    for y in grid.row_ys:
        if 0 <= y < h:
            out[y, :] = GREEN
    return out
