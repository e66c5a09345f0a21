"""Three parallel conv encoders, one per non-contrast modality.

Each channel runs four blocks of [3x3 conv (pad 1) -> ReLU -> edge injection
-> 2x2 max-pool] with output channels 64/128/256/512, taking an H x W grid to
a 512 x H/16 x W/16 stack. The edge injection adds a bias-free 1x1 projection
of the matching pyramid level after the nonlinearity; with edges disabled the
projections are simply absent, which equals feeding all-zero pyramids.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .edges import EdgePyramid, PYRAMID_LEVELS, inject
from .errors import DimensionError
from .torchutil import check_finite, seeded_init, to_batch

MODALITIES = ("t1", "t2", "dwi")
BLOCK_CHANNELS = (64, 128, 256, 512)
POOL_FACTOR = 2 ** len(BLOCK_CHANNELS)  # total spatial shrink, H -> H/16


class Encoder(nn.Module):
    def __init__(self, use_edges: bool = True, seed: int = 0):
        super().__init__()
        self.use_edges = use_edges
        self.convs = nn.ModuleDict()
        self.projs = nn.ModuleDict() if use_edges else None
        for mod in MODALITIES:
            chans = (1,) + BLOCK_CHANNELS
            blocks = nn.ModuleList(
                nn.Conv2d(chans[k], chans[k + 1], 3, padding=1) for k in range(len(BLOCK_CHANNELS))
            )
            self.convs[mod] = blocks
            for k, blk in enumerate(blocks):
                seeded_init(blk, seed, f"enc.{mod}.conv{k}")
            if use_edges:
                projs = nn.ModuleList(
                    nn.Conv2d(1, c, 1, bias=False) for c in BLOCK_CHANNELS
                )
                self.projs[mod] = projs
                for k, p in enumerate(projs):
                    seeded_init(p, seed, f"enc.{mod}.proj{k}")
        self.pool = nn.MaxPool2d(2)

    def forward(self, grids: dict[str, torch.Tensor],
                pyramids: dict[str, list[torch.Tensor]] | None = None) -> dict[str, torch.Tensor]:
        """grids: modality -> (B,1,H,W); pyramids: modality -> per-level (B,1,h,w)."""
        h, w = next(iter(grids.values())).shape[-2:]
        if h % POOL_FACTOR or w % POOL_FACTOR:
            raise DimensionError(f"input {h}x{w} not divisible by {POOL_FACTOR}")
        if self.use_edges and pyramids is None:
            raise DimensionError("encoder built with edge injection but no pyramids given")
        out = {}
        for mod in MODALITIES:
            x = grids[mod]
            for k, conv in enumerate(self.convs[mod]):
                x = torch.relu(conv(x))
                if self.use_edges:
                    x = inject(pyramids[mod][k], x, self.projs[mod][k].weight)
                x = self.pool(x)
                check_finite(x, f"encoder {mod} block {k}")
            out[mod] = x
        return out


def _pyr_tensors(pyr: EdgePyramid) -> list[torch.Tensor]:
    return [to_batch(lev) for lev in pyr.levels]


def encode(t1: np.ndarray, t2: np.ndarray, dwi: np.ndarray,
           pyramids: dict[str, EdgePyramid] | None, encoder: Encoder) -> dict[str, torch.Tensor]:
    """Single-sample convenience: numpy grids in, (512, H/16, W/16) stacks out."""
    grids = {"t1": to_batch(t1), "t2": to_batch(t2), "dwi": to_batch(dwi)}
    pt = None
    if pyramids is not None:
        if any(len(pyramids[m]) != PYRAMID_LEVELS for m in MODALITIES):
            raise DimensionError(f"expected {PYRAMID_LEVELS} pyramid levels per modality")
        pt = {m: _pyr_tensors(pyramids[m]) for m in MODALITIES}
    feats = encoder(grids, pt)
    return {m: f.squeeze(0) for m, f in feats.items()}
