"""End-to-end digitization: photo -> grid -> cells -> recognized table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gridscan import grid as G
from gridscan import imaging as im
from gridscan.config import PipelineConfig
from gridscan.recognizer import Prediction, Recognizer, predict_cells


@dataclass
class LineMasks:
    gray: np.ndarray  # resized working canvas
    binary: np.ndarray
    vertical: np.ndarray
    horizontal: np.ndarray

    @property
    def combined(self) -> np.ndarray:
        return im.combine_masks(self.vertical, self.horizontal)


@dataclass
class GridDetection:
    masks: LineMasks
    grid: G.GridModel  # working-canvas coordinates
    raw_cols: list[int]
    raw_rows: list[int]
    source_size: tuple[int, int]  # (w, h) of the input

    @property
    def source_grid(self) -> G.GridModel:
        """Grid positions mapped back onto the input image."""
        w, h = self.source_size
        gh, gw = self.masks.gray.shape
        return self.grid.scaled(w / gw, h / gh)


@dataclass
class Digitized:
    detection: GridDetection
    cells: list[G.CellRegion]
    predictions: list[Prediction]

    @property
    def table(self) -> list[list[str]]:
        g = self.detection.grid
        out = [["" for _ in range(g.n_cols)] for _ in range(g.n_rows)]
        for cell, p in zip(self.cells, self.predictions):
            out[cell.row][cell.col] = "" if p.is_empty else p.text
        return out


def line_masks(img: np.ndarray, cfg: PipelineConfig = PipelineConfig()) -> LineMasks:
    gray = im.to_grayscale(img)
    gray = im.resize(gray, cfg.resize_w, cfg.resize_h)
    blurred = im.gaussian_blur_5x5(gray)
    binary = im.adaptive_threshold(blurred, cfg.block, cfg.c)
    vertical = im.morph_open(binary, im.vertical_se(cfg.morph_len))
    horizontal = im.morph_open(binary, im.horizontal_se(cfg.morph_len))
    return LineMasks(gray, binary, vertical, horizontal)


def detect_grid(img: np.ndarray, cfg: PipelineConfig = PipelineConfig()) -> GridDetection:
    """Raises :class:`DegenerateGrid` when fewer than two rows or columns survive."""
    masks = line_masks(img, cfg)
    cols = G.column_positions(masks.vertical, cfg.morph_len, cfg.min_span_frac)
    rows = G.row_positions(masks.horizontal, cfg.morph_len, cfg.min_span_frac)
    grid = G.build_grid(G.group_positions(cols, cfg.group_gap), G.group_positions(rows, cfg.group_gap))
    h, w = img.shape[:2]
    return GridDetection(masks, grid, cols, rows, (w, h))


def digitize(img: np.ndarray, model: Recognizer, cfg: PipelineConfig = PipelineConfig()) -> Digitized:
    det = detect_grid(img, cfg)
    cells = G.extract_cells(det.masks.gray, det.grid, cfg.cell_inset)
    preds = predict_cells(model, [c.image for c in cells], cfg.empty_threshold, cfg.block, cfg.c)
    return Digitized(det, cells, preds)
