"""Seeded parameter init and small tensor helpers.

Every network component draws its init from its own RNG stream keyed by
(seed, tag), so toggling one component on or off cannot shift the draws of
another. Needed for the exact-equality ablation checks.
"""

from __future__ import annotations

import math
import zlib

import numpy as np
import torch
from torch import nn

from .errors import NumericError


def component_generator(seed: int, tag: str) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed((int(seed) * 1_000_003 + zlib.crc32(tag.encode())) % (2**63 - 1))
    return g


def _fan_in(module: nn.Module) -> int:
    w = module.weight
    if isinstance(module, nn.ConvTranspose2d):
        return w.shape[0] * w.shape[2] * w.shape[3]
    if isinstance(module, (nn.Conv2d,)):
        return w.shape[1] * w.shape[2] * w.shape[3]
    if isinstance(module, nn.Linear):
        return w.shape[1]
    raise TypeError(f"no fan-in rule for {type(module).__name__}")


def seeded_init(module: nn.Module, seed: int, tag: str) -> None:
    """Fan-in-scaled uniform init, one stream per (seed, tag)."""
    g = component_generator(seed, tag)
    with torch.no_grad():
        for _, m in module.named_modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                bound = 1.0 / math.sqrt(_fan_in(m))
                m.weight.uniform_(-bound, bound, generator=g)
                if m.bias is not None:
                    m.bias.uniform_(-bound, bound, generator=g)


def to_batch(grid: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """(H,W) numpy -> (1,1,H,W) tensor."""
    return torch.from_numpy(np.ascontiguousarray(grid)).to(dtype).unsqueeze(0).unsqueeze(0)


def check_finite(x: torch.Tensor, where: str) -> torch.Tensor:
    if not torch.isfinite(x).all():
        raise NumericError(f"non-finite values in {where}")
    return x
