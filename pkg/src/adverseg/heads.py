"""Segmentation decoder and the detection stand-in head.

The decoder mirrors the encoder: four 2x transposed-conv blocks taking the
512 x H/16 x W/16 fused stack back to a full-resolution probability map. The
detection head global-average-pools its stack through two FC layers into
3 class logits and 4 raw box values; raw values are squashed by a logistic
and scaled by the image extent, and the square side is max(w, h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .boxes import BoxTuple, clamp_box
from .errors import DimensionError
from .torchutil import check_finite, seeded_init

DECODER_CHANNELS = (512, 512, 256, 128, 64)
HEAD_HIDDEN = 256
NUM_CLASSES = 3


class SegDecoder(nn.Module):
    def __init__(self, seed: int = 0):
        super().__init__()
        self.deconvs = nn.ModuleList(
            nn.ConvTranspose2d(DECODER_CHANNELS[i], DECODER_CHANNELS[i + 1],
                               3, stride=2, padding=1, output_padding=1)
            for i in range(len(DECODER_CHANNELS) - 1)
        )
        self.final = nn.Conv2d(DECODER_CHANNELS[-1], 1, 1)
        for k, d in enumerate(self.deconvs):
            seeded_init(d, seed, f"seg.deconv{k}")
        seeded_init(self.final, seed, "seg.final")

    def forward(self, f_seg: torch.Tensor) -> torch.Tensor:
        if f_seg.shape[1] != DECODER_CHANNELS[0]:
            raise DimensionError(f"decoder wants {DECODER_CHANNELS[0]} channels, got {f_seg.shape[1]}")
        x = f_seg
        for k, d in enumerate(self.deconvs):
            x = torch.relu(d(x))
            check_finite(x, f"seg decoder block {k}")
        return torch.sigmoid(self.final(x))


class DetectionHead(nn.Module):
    def __init__(self, in_channels: int = 512, seed: int = 0):
        super().__init__()
        self.fc1 = nn.Linear(in_channels, HEAD_HIDDEN)
        self.fc2 = nn.Linear(HEAD_HIDDEN, NUM_CLASSES + 4)
        seeded_init(self.fc1, seed, "det.fc1")
        seeded_init(self.fc2, seed, "det.fc2")

    def forward(self, f_dec: torch.Tensor, height: int, width: int):
        """Returns (class logits (B,3), box (B,3) as pixel (cx, cy, side))."""
        g = f_dec.mean(dim=(2, 3))
        out = self.fc2(torch.relu(self.fc1(g)))
        check_finite(out, "detection head logits")
        logits = out[:, :NUM_CLASSES]
        raw = torch.sigmoid(out[:, NUM_CLASSES:])
        cx = raw[:, 0] * width
        cy = raw[:, 1] * height
        bw = raw[:, 2] * width
        bh = raw[:, 3] * height
        side = torch.maximum(bw, bh)
        return logits, torch.stack((cx, cy, side), dim=1)


@dataclass
class SegPrediction:
    probs: np.ndarray  # (H,W) in [0,1]

    def mask(self, threshold: float = 0.5) -> np.ndarray:
        return (self.probs >= threshold).astype(np.float32)


@dataclass
class DetPrediction:
    class_probs: np.ndarray  # (3,)
    box: BoxTuple            # clamped inside the image

    @property
    def cls(self) -> int:
        return int(np.argmax(self.class_probs))


def decode_seg(f_seg: torch.Tensor, decoder: SegDecoder) -> SegPrediction:
    probs = decoder(f_seg.unsqueeze(0)).squeeze(0).squeeze(0)
    return SegPrediction(probs=probs.detach().numpy())


def detect(f_dec: torch.Tensor, head: DetectionHead, height: int, width: int) -> DetPrediction:
    with torch.no_grad():
        logits, box = head(f_dec.unsqueeze(0), height, width)
    probs = torch.softmax(logits, dim=1).squeeze(0).numpy()
    cx, cy, side = (float(v) for v in box.squeeze(0))
    return DetPrediction(class_probs=probs,
                         box=clamp_box(BoxTuple(cx, cy, side), height, width))
