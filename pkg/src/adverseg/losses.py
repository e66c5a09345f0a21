"""Every loss in the game, as small composable functions.

Orientation notes that matter:
 - pix_ce is the conventional mean of -[t*log p + (1-t)*log(1-p)].
 - disc_loss defaults to the label convention (fake->1, real->0); pass
   swapped=True (CLI --swap-disc-labels) for the usual GAN orientation.
 - reg terms run on coordinates normalized by the image extent.
Probabilities are clamped to [eps, 1-eps] with eps=1e-7 before any log.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

CLAMP_EPS = 1e-7


@dataclass
class LossWeights:
    lambda1: float = 1.0  # adv weight in the segmentation loss
    lambda2: float = 1.0  # box regression weight
    lambda3: float = 1.0  # adv weight in the detection loss


def _t(x) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float64)


def _clamped_log(p: torch.Tensor) -> torch.Tensor:
    return torch.log(torch.clamp(p, CLAMP_EPS, 1.0 - CLAMP_EPS))


def pix_ce(pred, target) -> torch.Tensor:
    """Mean pixel-wise binary cross-entropy."""
    pred, target = _t(pred), _t(target).to(_t(pred).dtype)
    return -(target * _clamped_log(pred) + (1.0 - target) * _clamped_log(1.0 - pred)).mean()


def adv_loss(score, label) -> torch.Tensor:
    """-[y*log s + (1-y)*log(1-s)] on a single realness score."""
    score = _t(score)
    y = float(label)
    return -(y * _clamped_log(score) + (1.0 - y) * _clamped_log(1.0 - score))


def disc_loss(fake_score, real_score, swapped: bool = False) -> torch.Tensor:
    if swapped:
        return adv_loss(fake_score, 0) + adv_loss(real_score, 1)
    return adv_loss(fake_score, 1) + adv_loss(real_score, 0)


def smooth_l1(x) -> torch.Tensor:
    x = _t(x)
    ax = x.abs()
    return torch.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def reg_loss(pred_box, target_box, extent: tuple[int, int]) -> torch.Tensor:
    """Sum of smooth-L1 over (cx, cy, side), normalized by (W, H, max side).

    pred_box/target_box: (3,) tensors or tuples in pixel units.
    """
    pred_box, target_box = _t(pred_box), _t(target_box)
    h, w = extent
    norm = torch.tensor([w, h, max(h, w)], dtype=pred_box.dtype)
    return smooth_l1(pred_box / norm - target_box.to(pred_box.dtype) / norm).sum()


def cls_loss(class_probs, cls_target: int) -> torch.Tensor:
    """-log p[target] on an already-softmaxed probability vector."""
    return -_clamped_log(_t(class_probs)[int(cls_target)])


def seg_loss(probs, target, adv_score=None, weights: LossWeights = LossWeights()) -> torch.Tensor:
    total = pix_ce(probs, target)
    if adv_score is not None:
        total = total + weights.lambda1 * adv_loss(adv_score, 1)
    return total


def det_loss(class_probs, cls_target: int, pred_box, target_box,
             extent: tuple[int, int], adv_score=None,
             weights: LossWeights = LossWeights()) -> torch.Tensor:
    total = cls_loss(class_probs, cls_target)
    if int(cls_target) >= 1:
        total = total + weights.lambda2 * reg_loss(pred_box, target_box, extent)
    if adv_score is not None:
        total = total + weights.lambda3 * adv_loss(adv_score, 1)
    return total
