"""Fixed 64x64 integration canvas around the predicted box.

The canvas is prefilled with the sentinel value 2 (impossible for a
probability), then the mask window cut by the box is placed centered, at unit
scale, zero-extended where the window leaves the image. Two differentiable
variants exist for predicted probability maps: hard mode crops exactly like
the reference path (gradient reaches the probabilities only), soft mode keeps
the box coordinates differentiable by sampling the content bilinearly around
(cx, cy) and blending through a product-of-logistics window in side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch

from .boxes import BoxTuple, round_half_up
from .errors import DimensionError, DomainError

CANVAS_SIZE = 64
PAD_VALUE = 2.0
SOFT_TAU = 0.5  # logistic edge temperature, in pixels


@dataclass
class IntegrationCanvas:
    values: np.ndarray  # (64,64) float32; window cells in [0,1], ring = 2
    box: BoxTuple


def window_geometry(box: BoxTuple) -> tuple[int, int, int]:
    """(row0, col0, side) of the image window, side clamped to the canvas."""
    s = round_half_up(box.side)
    if s > CANVAS_SIZE:
        warnings.warn(f"box side {box.side} exceeds canvas {CANVAS_SIZE}, clamping")
        s = CANVAS_SIZE
    if s < 1:
        raise DomainError(f"box side {box.side} rounds to nothing")
    r0 = round_half_up(box.cy) - s // 2
    c0 = round_half_up(box.cx) - s // 2
    return r0, c0, s


def integrate(mask: np.ndarray, box: BoxTuple) -> IntegrationCanvas:
    """Reference hard-crop integration of a binary mask."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DimensionError(f"mask must be 2-d, got rank {mask.ndim}")
    if not np.isin(mask, (0.0, 1.0)).all():
        raise DomainError("integrate wants a binary mask")
    h, w = mask.shape
    r0, c0, s = window_geometry(box)
    crop = np.zeros((s, s), dtype=np.float32)
    rlo, rhi = max(r0, 0), min(r0 + s, h)
    clo, chi = max(c0, 0), min(c0 + s, w)
    if rlo < rhi and clo < chi:
        crop[rlo - r0:rhi - r0, clo - c0:chi - c0] = mask[rlo:rhi, clo:chi]
    canvas = np.full((CANVAS_SIZE, CANVAS_SIZE), PAD_VALUE, dtype=np.float32)
    st = (CANVAS_SIZE - s) // 2
    canvas[st:st + s, st:st + s] = crop
    return IntegrationCanvas(values=canvas, box=box)


def _as_box_tensor(box) -> torch.Tensor:
    if isinstance(box, BoxTuple):
        return torch.tensor([box.cx, box.cy, box.side], dtype=torch.float64)
    if box.shape != (3,):
        raise DimensionError(f"box tensor must be shape (3,), got {tuple(box.shape)}")
    return box


def integrate_soft(probs: torch.Tensor, box, mode: str = "soft") -> torch.Tensor:
    """Differentiable canvas for a predicted probability map.

    probs: (H,W) tensor in [0,1]. box: BoxTuple or (cx, cy, side) tensor.
    hard mode reproduces integrate() bit-for-bit on binary probs; soft mode
    additionally carries gradient into the box coordinates.
    """
    if probs.dim() != 2:
        raise DimensionError(f"probs must be 2-d, got rank {probs.dim()}")
    with torch.no_grad():
        if float(probs.min()) < 0.0 or float(probs.max()) > 1.0:
            raise DomainError("probabilities outside [0,1]")
    bt = _as_box_tensor(box)
    if mode == "hard":
        return _hard_canvas(probs, bt)
    if mode == "soft":
        return _soft_canvas(probs, bt)
    raise DomainError(f"unknown canvas mode {mode!r}")


def _hard_canvas(probs: torch.Tensor, bt: torch.Tensor) -> torch.Tensor:
    h, w = probs.shape
    cx, cy, side = (float(v) for v in bt.detach())
    if round_half_up(side) < 1:
        # zero-cell window: all sentinel, the limit soft mode tends to as
        # side -> 0. Predicted sides do visit this region early in training.
        return torch.full((CANVAS_SIZE, CANVAS_SIZE), PAD_VALUE, dtype=probs.dtype)
    r0, c0, s = window_geometry(BoxTuple(cx, cy, side))
    pt, pl = max(0, -r0), max(0, -c0)
    pb, pr = max(0, r0 + s - h), max(0, c0 + s - w)
    padded = torch.nn.functional.pad(probs.unsqueeze(0).unsqueeze(0), (pl, pr, pt, pb)).squeeze(0).squeeze(0)
    window = padded[r0 + pt:r0 + pt + s, c0 + pl:c0 + pl + s]
    canvas = torch.full((CANVAS_SIZE, CANVAS_SIZE), PAD_VALUE, dtype=probs.dtype)
    st = (CANVAS_SIZE - s) // 2
    canvas[st:st + s, st:st + s] = window
    return canvas


def _soft_canvas(probs: torch.Tensor, bt: torch.Tensor) -> torch.Tensor:
    h, w = probs.shape
    dtype = probs.dtype
    bt = bt.to(dtype)
    cx, cy = bt[0], bt[1]
    if float(bt[2].detach()) > CANVAS_SIZE:
        warnings.warn(f"box side {float(bt[2].detach())} exceeds canvas {CANVAS_SIZE}, clamping")
    side = torch.clamp(bt[2], max=float(CANVAS_SIZE))
    off = torch.arange(CANVAS_SIZE, dtype=dtype) - (CANVAS_SIZE - 1) / 2.0
    ys = cy + off  # sampling rows, unit scale
    xs = cx + off
    sample = _bilinear(probs, ys, xs)
    wu = torch.sigmoid((side / 2.0 - off.abs()) / SOFT_TAU)
    w2 = wu.unsqueeze(1) * wu.unsqueeze(0)
    return w2 * sample + (1.0 - w2) * PAD_VALUE


def _bilinear(img: torch.Tensor, ys: torch.Tensor, xs: torch.Tensor) -> torch.Tensor:
    """Sample img on the outer grid ys x xs; zero outside the image."""
    h, w = img.shape
    # shift by the pixel-center convention: value of pixel (r,c) lives at (r,c)
    y0 = torch.floor(ys)
    x0 = torch.floor(xs)
    ty = (ys - y0).unsqueeze(1)
    tx = (xs - x0).unsqueeze(0)
    out = torch.zeros((ys.numel(), xs.numel()), dtype=img.dtype)
    for dy in (0, 1):
        iy = y0.long() + dy
        vy = ((iy >= 0) & (iy < h)).to(img.dtype).unsqueeze(1)
        cy_idx = iy.clamp(0, h - 1)
        wy = (1.0 - ty) if dy == 0 else ty
        for dx in (0, 1):
            ix = x0.long() + dx
            vx = ((ix >= 0) & (ix < w)).to(img.dtype).unsqueeze(0)
            cx_idx = ix.clamp(0, w - 1)
            wx = (1.0 - tx) if dx == 0 else tx
            vals = img[cy_idx.unsqueeze(1), cx_idx.unsqueeze(0)]
            out = out + wy * wx * vy * vx * vals
    return out
