"""Feature fusion between the three encoder outputs.

The gated path computes a shared attention stack

    f_a   = tanh(conv_b(relu(conv_a(cat(f_t1, f_t2, f_dwi)))))
    f_seg = relu(conv_c(cat(f_a, f_t1)))
    f_dec = relu(conv_d(cat(f_a, f_dwi)))

so the segmentation branch leans on T1 texture and the detection branch on
DWI. The ablated path replaces all of it with a single conv on the plain
concat, feeding the same stack to both branches.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import DimensionError
from .torchutil import seeded_init


class FusionGate(nn.Module):
    def __init__(self, channels: int = 512, kernel_size: int = 3, seed: int = 0):
        super().__init__()
        pad = kernel_size // 2
        c = channels
        self.conv_a = nn.Conv2d(3 * c, c, kernel_size, padding=pad)
        self.conv_b = nn.Conv2d(c, c, kernel_size, padding=pad)
        self.conv_c = nn.Conv2d(2 * c, c, kernel_size, padding=pad)
        self.conv_d = nn.Conv2d(2 * c, c, kernel_size, padding=pad)
        self.channels = c
        for name in ("conv_a", "conv_b", "conv_c", "conv_d"):
            seeded_init(getattr(self, name), seed, f"fsc.{name}")

    def forward(self, f_t1: torch.Tensor, f_t2: torch.Tensor,
                f_dwi: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        for f in (f_t2, f_dwi):
            if f.shape != f_t1.shape:
                raise DimensionError(f"feature stacks disagree: {f_t1.shape} vs {f.shape}")
        f_a = torch.tanh(self.conv_b(torch.relu(self.conv_a(torch.cat((f_t1, f_t2, f_dwi), 1)))))
        f_seg = torch.relu(self.conv_c(torch.cat((f_a, f_t1), 1)))
        f_dec = torch.relu(self.conv_d(torch.cat((f_a, f_dwi), 1)))
        return f_seg, f_dec

    def attention(self, f_t1, f_t2, f_dwi) -> torch.Tensor:
        return torch.tanh(self.conv_b(torch.relu(self.conv_a(torch.cat((f_t1, f_t2, f_dwi), 1)))))


class FusionConcat(nn.Module):
    """Plain-concat stand-in used by the fsc ablation."""

    def __init__(self, channels: int = 512, kernel_size: int = 3, seed: int = 0):
        super().__init__()
        self.conv_s = nn.Conv2d(3 * channels, channels, kernel_size, padding=kernel_size // 2)
        self.channels = channels
        seeded_init(self.conv_s, seed, "fsc.conv_s")

    def forward(self, f_t1, f_t2, f_dwi):
        f_s = torch.relu(self.conv_s(torch.cat((f_t1, f_t2, f_dwi), 1)))
        return f_s, f_s


def fuse(f_t1: torch.Tensor, f_t2: torch.Tensor, f_dwi: torch.Tensor,
         gate: FusionGate | FusionConcat) -> tuple[torch.Tensor, torch.Tensor]:
    """Single-sample convenience over (C,h,w) stacks."""
    seg, dec = gate(f_t1.unsqueeze(0), f_t2.unsqueeze(0), f_dwi.unsqueeze(0))
    return seg.squeeze(0), dec.squeeze(0)
