"""Radiomics-guided discriminator over integration canvases.

Three [3x3 conv -> ReLU -> 2x2 max-pool] blocks (64/128/256 channels) take
the 64x64 canvas to 256x8x8; the flattened stack is concatenated with the
multi-phase radiomics vector (skipped when that guidance is ablated) and two
FC layers emit a single realness score through a logistic.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .canvas import CANVAS_SIZE
from .errors import DimensionError
from .torchutil import check_finite, seeded_init

DISC_CHANNELS = (64, 128, 256)
DISC_FC = 256
_FLAT = DISC_CHANNELS[-1] * (CANVAS_SIZE // 2 ** len(DISC_CHANNELS)) ** 2  # 256*8*8


class Discriminator(nn.Module):
    def __init__(self, mpr_len: int = 39, seed: int = 0):
        super().__init__()
        chans = (1,) + DISC_CHANNELS
        self.convs = nn.ModuleList(
            nn.Conv2d(chans[k], chans[k + 1], 3, padding=1) for k in range(len(DISC_CHANNELS))
        )
        self.pool = nn.MaxPool2d(2)
        self.mpr_len = int(mpr_len)
        self.fc1 = nn.Linear(_FLAT + self.mpr_len, DISC_FC)
        self.fc2 = nn.Linear(DISC_FC, 1)
        for k, c in enumerate(self.convs):
            seeded_init(c, seed, f"disc.conv{k}")
        seeded_init(self.fc1, seed, "disc.fc1")
        seeded_init(self.fc2, seed, "disc.fc2")

    def forward(self, canvas: torch.Tensor, mpr: torch.Tensor | None = None) -> torch.Tensor:
        """canvas (B,1,64,64), mpr (B,mpr_len) or None; returns (B,) in [0,1]."""
        if canvas.shape[-2:] != (CANVAS_SIZE, CANVAS_SIZE):
            raise DimensionError(f"canvas must be {CANVAS_SIZE}x{CANVAS_SIZE}, got {tuple(canvas.shape[-2:])}")
        x = canvas
        for k, c in enumerate(self.convs):
            x = self.pool(torch.relu(c(x)))
            check_finite(x, f"discriminator block {k}")
        x = x.flatten(1)
        if self.mpr_len:
            if mpr is None or mpr.shape[-1] != self.mpr_len:
                got = None if mpr is None else tuple(mpr.shape)
                raise DimensionError(f"expected radiomics vector of length {self.mpr_len}, got {got}")
            x = torch.cat((x, mpr.to(x.dtype)), dim=1)
        score = torch.sigmoid(self.fc2(torch.relu(self.fc1(x)))).squeeze(1)
        check_finite(score, "discriminator score")
        return score


def discriminate(canvas_values, mpr_vec, disc: Discriminator) -> float:
    """Single-sample convenience; accepts numpy canvas and vector."""
    c = torch.as_tensor(np.asarray(canvas_values), dtype=torch.float32).reshape(1, 1, CANVAS_SIZE, CANVAS_SIZE)
    v = None
    if disc.mpr_len:
        v = torch.as_tensor(np.asarray(mpr_vec), dtype=torch.float32).reshape(1, -1)
    with torch.no_grad():
        return float(disc(c, v))
