"""Edge dissimilarity pyramids between modality pairs.

Pipeline: Sobel gradient magnitude per modality (mirror padding), signed
difference of two magnitude maps, then a block-average pyramid whose levels
match the encoder block resolutions. Each modality channel is primed with the
dissimilarity of the OTHER two modalities:

    t1  <- edge(t2) - edge(dwi)
    t2  <- edge(t1) - edge(dwi)
    dwi <- edge(t1) - edge(t2)

Injection lifts a 1-channel level to C channels with a bias-free 1x1
projection and adds it onto the features, so a zero map is an exact no-op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DimensionError

PYRAMID_LEVELS = 4

_KX = ((-1, 0, 1), (-2, 0, 2), (-1, 0, 1))
_KY = ((-1, -2, -1), (0, 0, 0), (1, 2, 1))


def _correlate3(padded: np.ndarray, kernel) -> np.ndarray:
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(3):
        for j in range(3):
            k = kernel[i][j]
            if k:
                out += k * padded[i:i + h, j:j + w]
    return out


def sobel_edges(grid: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude sqrt(gx^2 + gy^2) with mirror padding."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise DimensionError(f"sobel_edges wants a 2-d grid, got rank {grid.ndim}")
    if grid.shape[0] < 3 or grid.shape[1] < 3:
        raise DimensionError(f"sobel_edges needs at least 3x3, got {grid.shape}")
    p = np.pad(grid, 1, mode="reflect")
    gx = _correlate3(p, _KX)
    gy = _correlate3(p, _KY)
    return np.sqrt(gx * gx + gy * gy)


def dissimilarity(edge_m: np.ndarray, edge_n: np.ndarray) -> np.ndarray:
    """Signed edge disagreement; the sign says which modality has the edge."""
    if edge_m.shape != edge_n.shape:
        raise DimensionError(f"edge maps disagree: {edge_m.shape} vs {edge_n.shape}")
    return edge_m - edge_n


def block_average2(grid: np.ndarray) -> np.ndarray:
    h, w = grid.shape
    if h % 2 or w % 2:
        raise DimensionError(f"block_average2 needs even dims, got {grid.shape}")
    return grid.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


@dataclass
class EdgePyramid:
    levels: list  # [L0 full-res, L1 half, ...]

    def __len__(self):
        return len(self.levels)


def build_pyramid(dmap: np.ndarray, levels: int = PYRAMID_LEVELS) -> EdgePyramid:
    h, w = dmap.shape
    div = 2 ** (levels - 1)
    if h % div or w % div:
        raise DimensionError(f"{h}x{w} not divisible by {div} for {levels} pyramid levels")
    out = [np.asarray(dmap, dtype=np.float32)]
    for _ in range(levels - 1):
        out.append(block_average2(out[-1]).astype(np.float32))
    return EdgePyramid(levels=out)


def modality_pyramids(t1: np.ndarray, t2: np.ndarray, dwi: np.ndarray,
                      levels: int = PYRAMID_LEVELS) -> dict[str, EdgePyramid]:
    """Pyramids keyed by the modality channel they prime (pair wiring above)."""
    e1, e2, ed = sobel_edges(t1), sobel_edges(t2), sobel_edges(dwi)
    return {
        "t1": build_pyramid(dissimilarity(e2, ed), levels),
        "t2": build_pyramid(dissimilarity(e1, ed), levels),
        "dwi": build_pyramid(dissimilarity(e1, e2), levels),
    }


def inject(pyr_level: torch.Tensor, feat: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
    """feat + 1x1-projected pyramid level.

    pyr_level (B,1,h,w), feat (B,C,h,w), weight (C,1,1,1); no bias by design
    so a zero level leaves feat untouched exactly.
    """
    if pyr_level.shape[-2:] != feat.shape[-2:]:
        raise DimensionError(
            f"pyramid level {tuple(pyr_level.shape[-2:])} does not match features {tuple(feat.shape[-2:])}"
        )
    return feat + torch.nn.functional.conv2d(pyr_level, weight)
