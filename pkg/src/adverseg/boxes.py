"""Square detection boxes and the one rasterization rule everybody shares.

A box is (cx, cy, side) in pixel units, stored as reals. Whenever a box has
to touch the pixel grid (cropping a canvas window, checking enclosure) the
center and side are rounded half-up and the window puts its extra cell on the
high side for even sides. Keeping a single rule here avoids +-1 drift between
the phantom generator, the canvas integration and the metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class BoxTuple:
    cx: float
    cy: float
    side: float

    def astuple(self) -> tuple[float, float, float]:
        return (self.cx, self.cy, self.side)


def round_half_up(x: float) -> int:
    """Round with ties away from the floor (2.5 -> 3), unlike python round()."""
    return int(math.floor(x + 0.5))


def pixel_window(box: BoxTuple) -> tuple[int, int, int]:
    """Rasterize a box: (row0, col0, side) of the covered pixel window.

    Window rows are [row0, row0+side), likewise cols; may exceed the image,
    callers zero-extend. For even sides the rounded center sits at local
    index side//2 (one cell right/below the geometric middle).
    """
    s = round_half_up(box.side)
    r0 = round_half_up(box.cy) - s // 2
    c0 = round_half_up(box.cx) - s // 2
    return r0, c0, s


def smallest_enclosing_box(mask: np.ndarray) -> BoxTuple:
    """Smallest centered square (rasterization rule above) covering the mask."""
    rows = np.any(mask > 0, axis=1)
    cols = np.any(mask > 0, axis=0)
    if not rows.any():
        raise DomainError("mask has no positive pixels, no box exists")
    rmin, rmax = np.nonzero(rows)[0][[0, -1]]
    cmin, cmax = np.nonzero(cols)[0][[0, -1]]
    h = int(rmax - rmin + 1)
    w = int(cmax - cmin + 1)
    s = max(h, w)
    r0 = int(rmin) - (s - h) // 2
    c0 = int(cmin) - (s - w) // 2
    return BoxTuple(cx=float(c0 + s // 2), cy=float(r0 + s // 2), side=float(s))


def clamp_box(box: BoxTuple, height: int, width: int) -> BoxTuple:
    """Clamp so the continuous square lies inside [0,width] x [0,height]."""
    side = min(box.side, float(min(height, width)))
    half = side / 2.0
    cx = min(max(box.cx, half), width - half)
    cy = min(max(box.cy, half), height - half)
    return BoxTuple(cx=cx, cy=cy, side=side)
