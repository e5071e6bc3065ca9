"""Pipeline configuration: a flat ``key = value`` text file."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class PipelineConfig:
    resize_w: int = 1000
    resize_h: int = 1000
    blur_kernel: int = 5
    block: int = 15
    c: float = 8.0
    morph_len: int = 30
    group_gap: int = 30
    cell_inset: int = 2
    min_span_frac: float = 0.5
    recognizer: str = "cnn"
    weights: str = ""
    empty_threshold: float = 0.01

    def validate(self) -> "PipelineConfig":
        checks = [
            (1 <= self.resize_w <= 8000 and 1 <= self.resize_h <= 8000, "resize dims must lie in 1..8000"),
            (self.blur_kernel == 5, "only a 5x5 blur kernel is supported"),
            (self.block >= 3 and self.block % 2 == 1, "block must be odd and >= 3"),
            (0 <= self.c <= 255, "c must lie in [0, 255]"),
            (self.morph_len >= 1, "morph_len must be >= 1"),
            (self.group_gap >= 0, "group_gap must be >= 0"),
            (self.cell_inset >= 0, "cell_inset must be >= 0"),
            (0 <= self.min_span_frac <= 1, "min_span_frac must lie in [0, 1]"),
            (self.recognizer in ("cnn", "centroid"), "recognizer must be 'cnn' or 'centroid'"),
            (0 <= self.empty_threshold <= 1, "empty_threshold must lie in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        return self

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    def updated(self, **overrides) -> "PipelineConfig":
        """Copy with non-None overrides applied (unknown keys rejected)."""
        values = asdict(self)
        for k, v in overrides.items():
            if k not in values:
                raise ValueError(f"unknown config key {k!r}")
            if v is not None:
                values[k] = v
        return PipelineConfig(**values).validate()


def parse_config(text: str) -> PipelineConfig:
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {n}: unknown config key {key!r}")
        kind = types[key]
        try:
            values[key] = int(val) if kind == "int" else float(val) if kind == "float" else val
        except ValueError:
            raise ValueError(f"line {n}: bad value {val!r} for {key}") from None
    return PipelineConfig(**values).validate()


def load_config(path: str | os.PathLike) -> PipelineConfig:
    return parse_config(Path(path).read_text())
