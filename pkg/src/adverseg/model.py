"""Generator assembly: encoders -> fusion -> seg decoder + detection head.

Parameter bookkeeping: theta_seg covers the shared encoders, the fusion and
the decoder; theta_dec is the detection head. Both are updated together in
one backward pass, so the shared trunk receives summed gradients from the
two losses.
"""

from __future__ import annotations

import torch
from torch import nn

from .discriminator import Discriminator
from .encoder import Encoder, MODALITIES
from .fusion import FusionConcat, FusionGate
from .heads import DetectionHead, SegDecoder
from .radiomics import FEATURES_PER_PHASE


class Generator(nn.Module):
    def __init__(self, use_edges: bool = True, use_gate: bool = True, seed: int = 0):
        super().__init__()
        self.encoder = Encoder(use_edges=use_edges, seed=seed)
        self.fusion = FusionGate(seed=seed) if use_gate else FusionConcat(seed=seed)
        self.decoder = SegDecoder(seed=seed)
        self.det_head = DetectionHead(seed=seed)

    def forward(self, grids: dict[str, torch.Tensor],
                pyramids: dict[str, list[torch.Tensor]] | None,
                height: int, width: int):
        feats = self.encoder(grids, pyramids)
        f_seg, f_dec = self.fusion(feats["t1"], feats["t2"], feats["dwi"])
        probs = self.decoder(f_seg)
        logits, boxes = self.det_head(f_dec, height, width)
        return probs, logits, boxes

    def theta_seg(self) -> list[nn.Parameter]:
        return (list(self.encoder.parameters()) + list(self.fusion.parameters())
                + list(self.decoder.parameters()))

    def theta_dec(self) -> list[nn.Parameter]:
        return list(self.det_head.parameters())


def build_models(cfg, seed: int | None = None) -> tuple[Generator, Discriminator | None]:
    """Generator + (unless ablated) discriminator for a validated TrainConfig."""
    abl = set(cfg.ablate)
    seed = cfg.seed if seed is None else seed
    gen = Generator(use_edges="edfpm" not in abl, use_gate="fsc" not in abl, seed=seed)
    disc = None
    if "mprgd" not in abl:
        mpr_len = 0 if "mpr" in abl else FEATURES_PER_PHASE * len(cfg.phases)
        disc = Discriminator(mpr_len=mpr_len, seed=seed)
    return gen, disc


def zero_fill_grids(sample, modalities: tuple[str, ...]) -> dict:
    """Numpy grids for all three channels; absent combo members become zeros."""
    import numpy as np

    out = {}
    for m in MODALITIES:
        g = getattr(sample, m)
        if m in modalities:
            if g is None:
                from .errors import DataError
                raise DataError(f"{sample.sample_id}: modality {m} required by the combo but missing")
            out[m] = np.asarray(g, dtype=np.float32)
        else:
            out[m] = np.zeros(sample.shape, dtype=np.float32)
    return out
