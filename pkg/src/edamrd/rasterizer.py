"""
Waveform rendering and multi-representation diagram composition.

Each representation is min-max normalised to its own panel and drawn as a
1-px polyline (black on white, no anti-aliasing). Panels are stacked top to
bottom; the last panel absorbs the integer-division remainder.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .dataio import atomic_write
from .errors import FileError, InvalidInputError, InvalidParameterError
from .pipeline import REPRESENTATIONS, canonical_name

DIAGRAM_SIZE = 224


@dataclass(frozen=True)
class RenderStyle:
    width_px: int = DIAGRAM_SIZE
    height_px: int = DIAGRAM_SIZE
    line_value: int = 0
    background_value: int = 255
    line_thickness_px: int = 1

    def __post_init__(self):
        if self.width_px < 8 or self.height_px < 8:
            raise InvalidParameterError("panel must be at least 8x8 pixels")
        if self.line_thickness_px < 1:
            raise InvalidParameterError("line thickness must be >= 1")


@dataclass(frozen=True, eq=False)
class DiagramImage:
    pixels: np.ndarray
    panel_map: list = field(default_factory=list)

    def panel_map_json(self) -> str:
        return json.dumps([{"name": n, "rows": [a, b]} for n, (a, b) in self.panel_map])


def _round(v):
    return np.floor(np.asarray(v, dtype=float) + 0.5).astype(int)


def render_waveform(series, style: RenderStyle = RenderStyle()) -> np.ndarray:
    """Rasterise ``series`` into a ``(height_px, width_px)`` uint8 grid."""
    s = np.asarray(series, dtype=float).ravel()
    if s.size == 0:
        raise InvalidInputError("cannot render an empty series")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("cannot render non-finite values")
    W, H = style.width_px, style.height_px
    img = np.full((H, W), style.background_value, dtype=np.uint8)

    lo, hi = s.min(), s.max()
    if hi > lo:
        rows = (1.0 - (s - lo) / (hi - lo)) * (H - 1)
    else:
        rows = np.full(s.size, float((H - 1) // 2))
    if s.size == 1:
        cols = np.array([0, W - 1])
        rows = np.repeat(rows, 2)
    else:
        cols = _round(np.arange(s.size) * (W - 1) / (s.size - 1))

    t = style.line_thickness_px
    above, below = (t - 1) // 2, (t - 1) - (t - 1) // 2

    def fill(c, ra, rb):
        top, bot = sorted((int(ra), int(rb)))
        img[max(top - above, 0):min(bot + below, H - 1) + 1, c] = style.line_value

    for i in range(cols.size - 1):
        c0, c1 = int(cols[i]), int(cols[i + 1])
        r0, r1 = rows[i], rows[i + 1]
        if c1 == c0:
            fill(c0, _round(r0), _round(r1))
            continue
        cs = np.arange(c0, c1 + 1)
        left = np.clip(cs - 0.5, c0, c1)
        right = np.clip(cs + 0.5, c0, c1)
        slope = (r1 - r0) / (c1 - c0)
        ra = _round(r0 + slope * (left - c0))
        rb = _round(r0 + slope * (right - c0))
        for c, a, b in zip(cs, ra, rb):
            fill(int(c), a, b)
    return img


def panel_heights(k: int, total: int = DIAGRAM_SIZE) -> list[int]:
    base = total // k
    return [base] * (k - 1) + [total - base * (k - 1)]


def compose_diagram(bundle, order=REPRESENTATIONS, size: int = DIAGRAM_SIZE,
                    line_thickness_px: int = 1) -> DiagramImage:
    """Stack one waveform panel per representation into a ``size x size`` image."""
    names = [canonical_name(n) for n in order]
    if not names:
        raise InvalidParameterError("diagram needs at least one representation")
    pixels = np.empty((size, size), dtype=np.uint8)
    panel_map = []
    row = 0
    for name, h in zip(names, panel_heights(len(names), size)):
        style = RenderStyle(width_px=size, height_px=h, line_thickness_px=line_thickness_px)
        pixels[row:row + h] = render_waveform(bundle.series(name), style)
        panel_map.append((name, (row, row + h)))
        row += h
    return DiagramImage(pixels=pixels, panel_map=panel_map)


def png_bytes(image: DiagramImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image.pixels, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def encode_png(image: DiagramImage, path) -> None:
    """Write an 8-bit grayscale PNG; identical images give identical bytes."""
    atomic_write(path, png_bytes(image))


def decode_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.array(im.convert("L"), dtype=np.uint8)
    except OSError as exc:
        raise FileError(str(exc), path) from exc


def make_views(bundle, order=REPRESENTATIONS, fusion: str = "mrd", size: int = DIAGRAM_SIZE,
               line_thickness_px: int = 1) -> np.ndarray:
    """``(k, size, size)`` uint8 views: one diagram for ``mrd``, one per representation otherwise."""
    if fusion == "mrd":
        return compose_diagram(bundle, order, size, line_thickness_px).pixels[None]
    return np.stack([compose_diagram(bundle, [name], size, line_thickness_px).pixels for name in order])
