"""Deterministic synthetic marksheets, digit samples and augmentations.

Glyphs are procedurally stroked digits: a polyline template per class,
perturbed by a seeded affine jitter and rasterized at a chosen stroke width.
External glyphs can be loaded from ``<class>/<name>.pgm`` (dark ink on light
paper).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, TypeVar

import numpy as np

from gridscan.errors import SpecError
from gridscan.imaging import load_image, resize, save_image

T = TypeVar("T")

MAX_CANVAS = 4000


def _arc(cx, cy, rx, ry, a0, a1, n=14):
    t = np.radians(np.linspace(a0, a1, n))
    return [(cx + rx * math.cos(a), cy + ry * math.sin(a)) for a in t]


# Unit-box strokes (x right, y down). Angles in degrees, 0 = east, 90 = south.
DIGIT_STROKES: dict[str, list[list[tuple[float, float]]]] = {
    "0": [_arc(0.5, 0.5, 0.32, 0.45, 0, 360, 28)],
    "1": [[(0.32, 0.22), (0.55, 0.05), (0.55, 0.95)]],
    "2": [_arc(0.5, 0.3, 0.3, 0.25, 180, 380, 14) + [(0.18, 0.95), (0.85, 0.95)]],
    "3": [_arc(0.48, 0.28, 0.3, 0.23, 210, 450, 14), _arc(0.48, 0.72, 0.33, 0.23, 270, 510, 14)],
    "4": [[(0.68, 0.95), (0.68, 0.05), (0.12, 0.68), (0.9, 0.68)]],
    "5": [[(0.82, 0.05), (0.28, 0.05), (0.22, 0.45)] + _arc(0.48, 0.66, 0.32, 0.29, 225, 495, 16)],
    "6": [[(0.75, 0.08), (0.45, 0.2)] + _arc(0.5, 0.68, 0.3, 0.27, 200, 560, 24)],
    "7": [[(0.12, 0.05), (0.88, 0.05), (0.42, 0.95)], [(0.4, 0.5), (0.75, 0.5)]],
    "8": [_arc(0.5, 0.27, 0.25, 0.22, 0, 360, 20), _arc(0.5, 0.72, 0.32, 0.23, 0, 360, 22)],
    "9": [_arc(0.5, 0.3, 0.3, 0.25, 0, 360, 22), [(0.8, 0.3), (0.6, 0.95)]],
}


def _segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    t = np.zeros_like(px) if den == 0 else np.clip(((px - ax) * dx + (py - ay) * dy) / den, 0, 1)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def rasterize_strokes(strokes, size: int, thickness: float) -> np.ndarray:
    """Render unit-box polylines into a ``size x size`` bool mask."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    scale = size - thickness - 2
    off = (size - scale) / 2
    dist = np.full((size, size), np.inf)
    for stroke in strokes:
        pts = [(off + x * scale, off + y * scale) for x, y in stroke]
        for (ax, ay), (bx, by) in zip(pts, pts[1:]):
            dist = np.minimum(dist, _segment_distance(xx, yy, ax, ay, bx, by))
    return dist <= thickness / 2


def perturb_strokes(strokes, rng: np.random.Generator, amount: float = 1.0):
    """Seeded affine jitter (rotation, shear, anisotropic scale) plus per-point noise."""
    ang = math.radians(rng.uniform(-8, 8) * amount)
    shear = rng.uniform(-0.15, 0.15) * amount
    sx, sy = 1 + rng.uniform(-0.12, 0.12) * amount, 1 + rng.uniform(-0.08, 0.08) * amount
    ca, sa = math.cos(ang), math.sin(ang)
    out = []
    for stroke in strokes:
        pts = []
        for x, y in stroke:
            x, y = x - 0.5, y - 0.5
            x, y = sx * (x + shear * y), sy * y
            x, y = ca * x - sa * y, sa * x + ca * y
            nx, ny = rng.normal(0, 0.012 * amount, 2)
            pts.append((x + 0.5 + nx, y + 0.5 + ny))
        out.append(pts)
    return out


@dataclass
class GlyphSet:
    """Per-class lists of bool glyph masks (True = ink)."""

    glyphs: dict[str, list[np.ndarray]]

    def __post_init__(self):
        for cls, items in self.glyphs.items():
            if not items:
                raise SpecError(f"glyph class {cls!r} has no glyphs")

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(self.glyphs))


def builtin_glyphs(styles: int = 3, seed: int = 0, size: int = 48, thickness: float = 4.0) -> GlyphSet:
    """``styles`` perturbed renderings per digit; style 0 is the clean template."""
    rng = np.random.default_rng([seed, 11])
    glyphs = {}
    for digit, strokes in DIGIT_STROKES.items():
        items = []
        for s in range(styles):
            st = strokes if s == 0 else perturb_strokes(strokes, rng)
            items.append(rasterize_strokes(st, size, thickness))
        glyphs[digit] = items
    return GlyphSet(glyphs)


def load_glyph_dir(directory: str | os.PathLike) -> GlyphSet:
    root = Path(directory)
    glyphs: dict[str, list[np.ndarray]] = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        items = [load_image(f) < 128 for f in sorted(sub.glob("*.pgm"))]
        if items:
            glyphs[sub.name] = items
    if not glyphs:
        raise SpecError(f"no glyph PGMs found under {root}")
    return GlyphSet(glyphs)


def _ink_bbox(mask):
    ys, xs = np.nonzero(mask)
    return mask[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]


def stamp_glyph(canvas: np.ndarray, glyph: np.ndarray, cx: float, cy: float, box_w: float, box_h: float) -> None:
    """Draw ``glyph`` scaled to fit ``box_w x box_h`` (aspect kept), centered at (cx, cy), in place."""
    g = _ink_bbox(glyph)
    gh, gw = g.shape
    s = min(box_w / gw, box_h / gh)
    tw, th = max(1, int(round(gw * s))), max(1, int(round(gh * s)))
    ink = resize(g.astype(np.uint8) * 255, tw, th)
    x0, y0 = int(round(cx - tw / 2)), int(round(cy - th / 2))
    H, W = canvas.shape
    xa, ya = max(0, x0), max(0, y0)
    xb, yb = min(W, x0 + tw), min(H, y0 + th)
    if xa >= xb or ya >= yb:
        return
    patch = 255 - ink[ya - y0 : yb - y0, xa - x0 : xb - x0]
    np.minimum(canvas[ya:yb, xa:xb], patch, out=canvas[ya:yb, xa:xb])


# ---------------------------------------------------------------- sheets


@dataclass(frozen=True)
class SheetSpec:
    rows: int = 8
    cols: int = 12
    cell_w: int = 75
    cell_h: int = 100
    line_thickness: int = 2
    blank_fraction: float = 0.0
    seed: int = 0
    margin: int = 40
    line_jitter: int = 0
    glyph_scale: float = 0.6
    glyph_jitter: float = 0.1
    glyphs: GlyphSet | None = field(default=None, compare=False, repr=False)

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise SpecError("rows and cols must be positive")
        if not 1 <= self.line_thickness <= 5:
            raise SpecError(f"line thickness must be within 1..5, got {self.line_thickness}")
        if not 0 <= self.line_jitter <= 3:
            raise SpecError(f"line jitter must be within 0..3, got {self.line_jitter}")
        if min(self.cell_w, self.cell_h) - 2 * self.line_jitter <= 30:
            raise SpecError("cell spacing must stay above 30 px after jitter")
        if not 0 <= self.blank_fraction <= 1:
            raise SpecError("blank_fraction must lie in [0, 1]")
        if self.margin < 2 * self.line_jitter + 1:
            raise SpecError("margin too small for the line jitter")
        w, h = self.canvas_size
        if w > MAX_CANVAS or h > MAX_CANVAS:
            raise SpecError(f"canvas {w}x{h} exceeds {MAX_CANVAS}x{MAX_CANVAS}")

    @property
    def canvas_size(self) -> tuple[int, int]:
        w = 2 * self.margin + self.cols * self.cell_w + self.line_thickness
        h = 2 * self.margin + self.rows * self.cell_h + self.line_thickness
        return w, h


def sheet_lines(spec: SheetSpec) -> tuple[list[int], list[int]]:
    """Drawn column x-positions and row y-positions (left/top edge of each line)."""
    rng = np.random.default_rng([spec.seed, 1])
    j = spec.line_jitter
    xs = [spec.margin + i * spec.cell_w + (int(rng.integers(-j, j + 1)) if j else 0) for i in range(spec.cols + 1)]
    ys = [spec.margin + i * spec.cell_h + (int(rng.integers(-j, j + 1)) if j else 0) for i in range(spec.rows + 1)]
    return xs, ys


def render_sheet(spec: SheetSpec) -> tuple[np.ndarray, list[list[str]]]:
    """White canvas, black grid lines, one glyph per non-blank cell.

    Returns the gray image and the ground-truth table ('' marks a blank cell).
    """
    spec.validate()
    glyphs = spec.glyphs or builtin_glyphs()
    classes = glyphs.classes
    w, h = spec.canvas_size
    img = np.full((h, w), 255, dtype=np.uint8)
    xs, ys = sheet_lines(spec)
    t = spec.line_thickness
    for x in xs:
        img[ys[0] : ys[-1] + t, x : x + t] = 0
    for y in ys:
        img[y : y + t, xs[0] : xs[-1] + t] = 0

    rng = np.random.default_rng([spec.seed, 2])
    truth: list[list[str]] = []
    for r in range(spec.rows):
        row = []
        for c in range(spec.cols):
            blank = rng.random() < spec.blank_fraction
            label = classes[int(rng.integers(len(classes)))]
            style = int(rng.integers(len(glyphs.glyphs[label])))
            jx, jy = rng.uniform(-spec.glyph_jitter, spec.glyph_jitter, 2)
            if blank:
                row.append("")
                continue
            x0, x1 = xs[c] + t, xs[c + 1]
            y0, y1 = ys[r] + t, ys[r + 1]
            cw, ch = x1 - x0, y1 - y0
            stamp_glyph(
                img,
                glyphs.glyphs[label][style],
                (x0 + x1) / 2 + jx * cw,
                (y0 + y1) / 2 + jy * ch,
                spec.glyph_scale * cw,
                spec.glyph_scale * ch,
            )
            row.append(label)
        truth.append(row)
    return img, truth


def write_sheets(spec: SheetSpec, out_dir: str | os.PathLike, count: int = 1) -> list[Path]:
    """Write ``sheet_<k>.pgm`` / ``sheet_<k>.csv`` pairs; sheet k uses seed ``spec.seed + k``."""
    from gridscan.evaluate import write_table_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(count):
        img, truth = render_sheet(replace(spec, seed=spec.seed + k))
        save_image(img, out / f"sheet_{k}.pgm")
        write_table_csv(truth, out / f"sheet_{k}.csv")
        paths.append(out / f"sheet_{k}.pgm")
    return paths


# ---------------------------------------------------------------- augmentation


def _rotate_any(img: np.ndarray, degrees: float, fill: int = 255) -> np.ndarray:
    if degrees == 0:
        return img.copy()
    h, w = img.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    a = math.radians(degrees)
    ca, sa = math.cos(a), math.sin(a)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # inverse map: rotate destination coordinates back by -a
    sx = ca * (xx - cx) + sa * (yy - cy) + cx
    sy = -sa * (xx - cx) + ca * (yy - cy) + cy
    p = np.pad(img.astype(np.float64), 1, constant_values=fill)
    sx, sy = np.clip(sx + 1, 0, w + 1), np.clip(sy + 1, 0, h + 1)
    x0 = np.minimum(np.floor(sx).astype(np.intp), w)
    y0 = np.minimum(np.floor(sy).astype(np.intp), h)
    fx, fy = sx - x0, sy - y0
    out = (
        p[y0, x0] * (1 - fx) * (1 - fy)
        + p[y0, x0 + 1] * fx * (1 - fy)
        + p[y0 + 1, x0] * (1 - fx) * fy
        + p[y0 + 1, x0 + 1] * fx * fy
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def rotate(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center by up to +/-15 degrees; uncovered pixels are white."""
    if abs(degrees) > 15:
        raise ValueError(f"rotation limited to [-15, 15] degrees, got {degrees}")
    return _rotate_any(img, degrees)


def flip(img: np.ndarray, axis: str) -> np.ndarray:
    """``horizontal`` mirrors left-right, ``vertical`` mirrors top-bottom."""
    if axis == "horizontal":
        return img[:, ::-1].copy()
    if axis == "vertical":
        return img[::-1, :].copy()
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def crop(img: np.ndarray, rect: tuple[int, int, int, int]) -> np.ndarray:
    x, y, w, h = rect
    H, W = img.shape[:2]
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > W or y + h > H:
        raise ValueError(f"crop rect {rect} outside {W}x{H} image")
    return img[y : y + h, x : x + w].copy()


# ---------------------------------------------------------------- datasets


def split_sizes(n: int, fractions: Sequence[float] = (0.70, 0.20, 0.10)) -> tuple[int, ...]:
    """Floor sizes for every part but the first; the first takes the remainder."""
    if abs(sum(fractions) - 1) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    rest = [math.floor(n * f + 1e-9) for f in fractions[1:]]
    return (n - sum(rest), *rest)


def split(data, fractions: Sequence[float] = (0.70, 0.20, 0.10), seed: int = 0):
    """Seeded shuffle then contiguous partition into (train, test, val).

    Works on sequences and on anything with ``__len__`` and ``subset(indices)``.
    """
    n = len(data)
    sizes = split_sizes(n, fractions)
    order = np.random.default_rng([seed, 3]).permutation(n)
    parts, start = [], 0
    for size in sizes:
        idx = order[start : start + size]
        start += size
        parts.append(data.subset(idx) if hasattr(data, "subset") else [data[i] for i in idx])
    return tuple(parts)


def render_digit_cell(
    label: str,
    rng: np.random.Generator,
    cell: tuple[int, int] = (64, 80),
    max_rotation: float = 15.0,
) -> np.ndarray:
    """A gray cell crop holding one freshly perturbed digit, rotated within +/-``max_rotation``."""
    w, h = cell
    thickness = rng.uniform(2.5, 5.5)
    strokes = perturb_strokes(DIGIT_STROKES[label], rng, amount=rng.uniform(0.5, 1.5))
    glyph = rasterize_strokes(strokes, 48, thickness)
    canvas = np.full((h, w), 255, dtype=np.uint8)
    scale = rng.uniform(0.5, 0.7)
    jx, jy = rng.uniform(-0.08, 0.08, 2)
    stamp_glyph(canvas, glyph, w / 2 + jx * w, h / 2 + jy * h, scale * w, scale * h)
    return rotate(canvas, rng.uniform(-max_rotation, max_rotation))


def make_digit_dataset(n: int, seed: int = 0, classes: Sequence[str] = tuple(DIGIT_STROKES)):
    """``n`` synthetic digit samples pushed through the cell normalization path."""
    from gridscan.recognizer import LabeledDataset
    from gridscan.recognizer.features import cell_input

    rng = np.random.default_rng([seed, 4])
    xs, ys = [], []
    for i in range(n):
        k = int(rng.integers(len(classes)))
        x, _ = cell_input(render_digit_cell(classes[k], rng))
        xs.append(x)
        ys.append(k)
    return LabeledDataset(np.stack(xs) if xs else np.zeros((0, 32, 32), np.float32), np.array(ys, dtype=np.int64), tuple(classes))


def glyph_training_set(glyphs: GlyphSet, cell_w: int = 75, cell_h: int = 100, scale: float = 0.6):
    """Each glyph stamped alone in a blank cell and normalized like a detected cell."""
    from gridscan.recognizer import LabeledDataset
    from gridscan.recognizer.features import cell_input

    classes = glyphs.classes
    xs, ys = [], []
    for k, cls in enumerate(classes):
        for g in glyphs.glyphs[cls]:
            canvas = np.full((cell_h, cell_w), 255, dtype=np.uint8)
            stamp_glyph(canvas, g, cell_w / 2, cell_h / 2, scale * cell_w, scale * cell_h)
            x, _ = cell_input(canvas)
            xs.append(x)
            ys.append(k)
    return LabeledDataset(np.stack(xs), np.array(ys, dtype=np.int64), classes)


def write_digit_dataset(ds, out_dir: str | os.PathLike) -> Path:
    """Write ``digit_<k>.pgm`` (32x32, ink bright) files plus ``labels.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filename", "label"])
        for k, (x, y) in enumerate(zip(ds.x, ds.y)):
            name = f"digit_{k}.pgm"
            save_image(np.clip(np.rint(x * 255), 0, 255).astype(np.uint8), out / name)
            w.writerow([name, ds.classes[int(y)]])
    return out / "labels.csv"
