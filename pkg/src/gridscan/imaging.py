"""Raster codecs and the pixel-level preprocessing stages.

Images are plain numpy arrays:

* gray   -- ``uint8`` array of shape ``(h, w)``
* rgb    -- ``uint8`` array of shape ``(h, w, 3)``
* binary -- ``bool`` array of shape ``(h, w)``, True marks foreground (ink / grid line)

Only binary netpbm (P5 / P6, maxval 255) is read and written.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gridscan.errors import DimMismatch, FormatError

_WHITESPACE = b" \t\r\n\v\f"


@dataclass(frozen=True)
class StructuringElement:
    """All-ones rectangle anchored at ``(width // 2, height // 2)``."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"structuring element must be at least 1x1, got {self.width}x{self.height}")

    @property
    def anchor(self) -> tuple[int, int]:
        return self.width // 2, self.height // 2


def vertical_se(length: int = 30) -> StructuringElement:
    return StructuringElement(1, length)


def horizontal_se(length: int = 30) -> StructuringElement:
    return StructuringElement(length, 1)


# ---------------------------------------------------------------- codecs


def _read_header(buf: bytes) -> tuple[bytes, list[int], int]:
    """Parse magic + three integer fields; return (magic, fields, data offset)."""
    if len(buf) < 2:
        raise FormatError("file too short for a netpbm header")
    magic = buf[:2]
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(buf):
            raise FormatError("truncated header")
        ch = buf[pos : pos + 1]
        if ch in (b"#",):
            nl = buf.find(b"\n", pos)
            if nl < 0:
                raise FormatError("unterminated header comment")
            pos = nl + 1
            continue
        if ch in _WHITESPACE:
            pos += 1
            continue
        start = pos
        while pos < len(buf) and buf[pos : pos + 1] not in _WHITESPACE and buf[pos : pos + 1] != b"#":
            pos += 1
        token = buf[start:pos]
        if not token.isdigit():
            raise FormatError(f"non-numeric header field {token!r}")
        fields.append(int(token))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(buf) or buf[pos : pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval")
    return magic, fields, pos + 1


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a binary PGM (-> gray ``(h, w)``) or PPM (-> rgb ``(h, w, 3)``)."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r}; expected P5 or P6")
    magic, (w, h, maxval), offset = _read_header(buf)
    if maxval != 255:
        raise FormatError(f"maxval must be 255, got {maxval}")
    if w <= 0 or h <= 0:
        raise FormatError(f"invalid dimensions {w}x{h}")
    channels = 1 if magic == b"P5" else 3
    n = w * h * channels
    data = buf[offset : offset + n]
    if len(data) < n:
        raise FormatError(f"truncated raster: expected {n} bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype=np.uint8).copy()
    return arr.reshape(h, w) if channels == 1 else arr.reshape(h, w, 3)


def load_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a PGM written from a binary image back into a bool mask."""
    img = load_image(path)
    if img.ndim != 2:
        raise FormatError("mask files must be grayscale (P5)")
    return img > 0


def encode_image(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype == bool:
        img = img.astype(np.uint8) * 255
    if img.dtype != np.uint8:
        raise ValueError(f"images must be uint8 or bool, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("cannot encode an empty image")
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write gray/binary as P5 (True -> 255) and rgb as P6."""
    Path(path).write_bytes(encode_image(img))


# ---------------------------------------------------------------- color and geometry


def to_grayscale(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return img.copy()
    rgb = img.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(luma), 0, 255).astype(np.uint8)


def resize(img: np.ndarray, out_w: int = 1000, out_h: int = 1000) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and edge clamping.

    Equal input and output sizes return an exact copy.
    """
    if out_w <= 0 or out_h <= 0:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    h, w = img.shape
    if (w, h) == (out_w, out_h):
        return img.copy()

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    f = img.astype(np.float64)
    top = f[y0][:, x0] * (1 - fx) + f[y0][:, x1] * fx
    bot = f[y1][:, x0] * (1 - fx) + f[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------- filtering


def gaussian_kernel_1d(size: int = 5, sigma: float | None = None) -> np.ndarray:
    if sigma is None:
        sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8
    d = np.arange(size) - (size - 1) / 2
    k = np.exp(-(d**2) / (2 * sigma**2))
    return k / k.sum()


def _convolve_sep(f: np.ndarray, k: np.ndarray) -> np.ndarray:
    r = len(k) // 2
    p = np.pad(f, r, mode="reflect")
    h, w = f.shape
    tmp = sum(k[i] * p[:, i : i + w] for i in range(len(k)))
    return sum(k[i] * tmp[i : i + h, :] for i in range(len(k)))


def gaussian_blur_5x5(img: np.ndarray) -> np.ndarray:
    """Separable 5x5 Gaussian (sigma 1.1), reflected borders, rounded to uint8."""
    h, w = img.shape
    if h < 5 or w < 5:
        raise ValueError(f"image must be at least 5x5 for a 5x5 blur, got {w}x{h}")
    out = _convolve_sep(img.astype(np.float64), gaussian_kernel_1d(5))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def box_mean(img: np.ndarray, block: int) -> np.ndarray:
    """Mean over a ``block x block`` window with reflected borders."""
    r = block // 2
    p = np.pad(img.astype(np.float64), r, mode="reflect")
    c = np.zeros((p.shape[0] + 1, p.shape[1] + 1))
    c[1:, 1:] = p.cumsum(0).cumsum(1)
    h, w = img.shape
    s = c[block : block + h, block : block + w] - c[:h, block : block + w] - c[block : block + h, :w] + c[:h, :w]
    return s / (block * block)


def adaptive_threshold(img: np.ndarray, block: int = 15, c: float = 8) -> np.ndarray:
    """Inverse mean threshold: a pixel is ink iff ``value <= local_mean - c``."""
    if block < 3 or block % 2 == 0:
        raise ValueError(f"block must be odd and >= 3, got {block}")
    return img.astype(np.float64) <= box_mean(img, block) - c


# ---------------------------------------------------------------- morphology


def _window_count(mask: np.ndarray, x_lo: int, x_hi: int, y_lo: int, y_hi: int) -> np.ndarray:
    """Count of True pixels in ``[x+x_lo, x+x_hi] x [y+y_lo, y+y_hi]``; outside counts as 0."""
    h, w = mask.shape
    pt, pb = max(0, -y_lo), max(0, y_hi)
    pl, pr = max(0, -x_lo), max(0, x_hi)
    p = np.pad(mask.astype(np.int32), ((pt, pb), (pl, pr)))
    c = np.zeros((p.shape[0] + 1, p.shape[1] + 1), dtype=np.int64)
    c[1:, 1:] = p.cumsum(0).cumsum(1)
    ys, xs = np.arange(h) + pt, np.arange(w) + pl
    r0, r1 = ys + y_lo, ys + y_hi + 1
    c0, c1 = xs + x_lo, xs + x_hi + 1
    return c[r1][:, c1] - c[r0][:, c1] - c[r1][:, c0] + c[r0][:, c0]


def erode(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """1 where every pixel under the SE (placed at its anchor) is 1."""
    ax, ay = se.anchor
    n = _window_count(img, -ax, se.width - 1 - ax, -ay, se.height - 1 - ay)
    return n == se.width * se.height


def dilate(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """1 where the reflected SE hits any 1.

    The reflection makes ``dilate(erode(x))`` a true opening for even-sized
    elements; for odd sizes the window is the same as in :func:`erode`.
    """
    ax, ay = se.anchor
    n = _window_count(img, -(se.width - 1 - ax), ax, -(se.height - 1 - ay), ay)
    return n > 0


def morph_open(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    return dilate(erode(img, se), se)


def combine_masks(v: np.ndarray, h: np.ndarray) -> np.ndarray:
    if v.shape != h.shape:
        raise DimMismatch(f"mask shapes differ: {v.shape} vs {h.shape}")
    return np.logical_or(v, h)
