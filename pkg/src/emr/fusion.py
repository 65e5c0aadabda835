"""Scene fusion: place keyed layers into a target scene and blend by alpha.

Layers are real-virtual objects: a pixel rectangle with its matte, a
scale/translate transform, and a depth (larger = nearer).  Composition sorts
far-to-near and blends ``C = round(alpha*F + (1-alpha)*C)`` per channel.
Resampling is nearest-neighbor so results are integer-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidTransform, NoViews
from .raster import AlphaMatte, Frame, round_u8


@dataclass(frozen=True)
class RvoLayer:
    """A keyed layer with placement transform and depth."""

    pixels: Frame
    matte: AlphaMatte
    scale: float = 1.0
    tx: int = 0
    ty: int = 0
    depth: float = 0.0

    def __post_init__(self):
        if (self.pixels.width, self.pixels.height) != (self.matte.width, self.matte.height):
            raise ValueError("layer pixels and matte dimensions differ")


@dataclass(frozen=True)
class ViewSource:
    """One camera view: an identifier, its bearing, and its frame sequence."""

    id: str
    angle_deg: float
    frames: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.angle_deg < 360.0:
            raise ValueError("angle_deg must lie in [0, 360)")


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


def place_layer(layer: RvoLayer, canvas_w: int, canvas_h: int):
    """Resample and translate a layer onto a canvas; returns (Frame, AlphaMatte).

    Pixels falling outside the canvas are clipped; uncovered canvas pixels get
    alpha 0 (and black pixels).
    """
    if layer.scale <= 0:
        raise InvalidTransform(f"scale must be > 0, got {layer.scale}")
    src = layer.pixels.to_array()
    src_alpha = layer.matte.to_array()
    sw = _round_half_away(layer.pixels.width * layer.scale)
    sh = _round_half_away(layer.pixels.height * layer.scale)

    out = np.zeros((canvas_h, canvas_w, layer.pixels.channels), dtype=np.uint8)
    out_alpha = np.zeros((canvas_h, canvas_w))

    x0, x1 = max(0, layer.tx), min(canvas_w, layer.tx + sw)
    y0, y1 = max(0, layer.ty), min(canvas_h, layer.ty + sh)
    if x0 < x1 and y0 < y1:
        xs = np.arange(x0, x1)
        ys = np.arange(y0, y1)
        src_x = np.minimum(((xs - layer.tx) / layer.scale).astype(np.int64), layer.pixels.width - 1)
        src_y = np.minimum(((ys - layer.ty) / layer.scale).astype(np.int64), layer.pixels.height - 1)
        out[y0:y1, x0:x1] = src[src_y[:, None], src_x[None, :]]
        out_alpha[y0:y1, x0:x1] = src_alpha[src_y[:, None], src_x[None, :]]

    return Frame.from_array(out, index=layer.pixels.index), AlphaMatte.from_array(out_alpha)


def compose(background: Frame, layers) -> Frame:
    """Blend layers over the background, far first (ascending depth)."""
    canvas = background.to_array()
    ordered = sorted(layers, key=lambda l: l.depth)  # stable: equal depths keep input order
    for layer in ordered:
        if layer.pixels.channels != background.channels:
            raise DimensionMismatch("layer channel count differs from background")
        placed, matte = place_layer(layer, background.width, background.height)
        fg = placed.to_array().astype(np.float64)
        a = matte.to_array()[:, :, None]
        canvas = round_u8(a * fg + (1.0 - a) * canvas.astype(np.float64))
    return Frame.from_array(canvas, index=background.index)


def select_view(views, target_angle_deg: float) -> ViewSource:
    """Pick the view with minimum circular distance; ties go to the earlier view."""
    views = list(views)
    if not views:
        raise NoViews("no views to select from")

    def circ_dist(view):
        d = abs(view.angle_deg - target_angle_deg) % 360.0
        return min(d, 360.0 - d)

    best_i = min(range(len(views)), key=lambda i: (circ_dist(views[i]), i))
    return views[best_i]
