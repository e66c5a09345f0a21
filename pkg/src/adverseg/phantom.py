"""Synthetic multi-modality liver slices with tumor masks and boxes.

Each sample carries three non-contrast grids (t1, t2, dwi), three contrast
phases (ce_a, ce_pv, ce_d: arterial, portal-venous, delay), a binary mask and
a square box. Contrast rules are cartoon versions of the clinical signs (see
docs/phantom.md); they exist to give the detector and the discriminator
something learnable, not to look like real livers.

Class code: 0 = no tumor, 1 = hemangioma, 2 = HCC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .boxes import BoxTuple, pixel_window, smallest_enclosing_box
from .errors import DataError, DomainError

CLASS_NAMES = ("none", "hemangioma", "hcc")

# per-modality background base level; noise rides on top of these
_BG_BASE = {"t1": 0.45, "t2": 0.35, "dwi": 0.30, "ce_a": 0.40, "ce_pv": 0.45, "ce_d": 0.42}


@dataclass
class Sample:
    sample_id: str
    t1: np.ndarray
    t2: np.ndarray
    dwi: np.ndarray
    ce_a: np.ndarray
    ce_pv: np.ndarray
    ce_d: np.ndarray
    mask: np.ndarray
    box: BoxTuple | None
    cls: int

    def __post_init__(self):
        # intensity grids may be None (e.g. a stripped modality); mask never is
        shapes = {g.shape for g in self.grids().values() if g is not None} | {self.mask.shape}
        if len(shapes) != 1:
            raise DataError(f"{self.sample_id}: grid shapes disagree: {shapes}")
        if self.cls not in (0, 1, 2):
            raise DataError(f"{self.sample_id}: cls {self.cls} not in 0..2")
        m = np.asarray(self.mask)
        if not np.isin(m, (0.0, 1.0)).all():
            raise DomainError(f"{self.sample_id}: mask is not binary")
        has_tumor = bool(m.any())
        if (self.cls == 0) == has_tumor:
            raise DataError(f"{self.sample_id}: cls {self.cls} inconsistent with mask sum {m.sum()}")
        if (self.box is None) != (self.cls == 0):
            raise DataError(f"{self.sample_id}: box presence inconsistent with cls {self.cls}")
        if self.box is not None:
            r0, c0, s = pixel_window(self.box)
            rr, cc = np.nonzero(m)
            if rr.min() < r0 or rr.max() >= r0 + s or cc.min() < c0 or cc.max() >= c0 + s:
                raise DataError(f"{self.sample_id}: mask escapes its box window")

    def grids(self) -> dict[str, np.ndarray]:
        return {
            "t1": self.t1, "t2": self.t2, "dwi": self.dwi,
            "ce_a": self.ce_a, "ce_pv": self.ce_pv, "ce_d": self.ce_d,
        }

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape


@dataclass
class CorpusSpec:
    count: int
    height: int = 64
    width: int = 64
    mix: tuple[float, float, float] = (0.2, 0.4, 0.4)
    seed: int = 0


def class_counts(count: int, mix: tuple[float, float, float]) -> tuple[int, int, int]:
    """floor + largest-remainder apportionment; matches round() when that sums."""
    if count < 0 or abs(sum(mix) - 1.0) > 1e-9:
        raise DataError(f"bad corpus plan: count={count} mix={mix}")
    ideal = [count * f for f in mix]
    base = [int(math.floor(x)) for x in ideal]
    short = count - sum(base)
    order = sorted(range(3), key=lambda i: (-(ideal[i] - base[i]), i))
    for i in range(short):
        base[order[i]] += 1
    return tuple(base)


def _background(rng: np.random.Generator, h: int, w: int, base: float) -> np.ndarray:
    slow = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (h, w)), sigma=max(h, w) / 16.0)
    slow *= 0.06 / max(slow.std(), 1e-6)
    fine = rng.normal(0.0, 0.02, (h, w))
    return np.clip(base + slow + fine, 0.05, 0.95)


def _ellipse_mask(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    scale = min(h, w)
    a = rng.uniform(0.09, 0.19) * scale
    b = rng.uniform(0.09, 0.19) * scale
    theta = rng.uniform(0.0, math.pi)
    amax = max(a, b)
    margin = amax + 2.0
    cy = rng.uniform(margin, h - margin)
    cx = rng.uniform(margin, w - margin)
    yy, xx = np.mgrid[0:h, 0:w]
    u = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
    v = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
    mask = ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.float32)
    return mask


def _rim(mask: np.ndarray) -> np.ndarray:
    eroded = ndimage.binary_erosion(mask > 0, iterations=2)
    rim = (mask > 0) & ~eroded
    if not rim.any():
        rim = mask > 0
    return rim.astype(np.float32)


def make_sample(rng: np.random.Generator, sample_id: str, cls: int, h: int, w: int) -> Sample:
    grids = {name: _background(rng, h, w, base) for name, base in _BG_BASE.items()}
    mask = np.zeros((h, w), dtype=np.float32)
    box = None
    if cls != 0:
        mask = _ellipse_mask(rng, h, w)
        box = smallest_enclosing_box(mask)
        soft = ndimage.gaussian_filter(mask, sigma=0.7)
        rim = ndimage.gaussian_filter(_rim(mask), sigma=0.5)
        if cls == 1:
            # hemangioma: lights up on T2/DWI, bright rim on every CE phase
            grids["t2"] += 0.35 * soft
            grids["dwi"] += 0.30 * soft
            grids["t1"] -= 0.12 * soft
            grids["ce_a"] += 0.40 * rim + 0.08 * soft
            grids["ce_pv"] += 0.35 * rim + 0.10 * soft
            grids["ce_d"] += 0.30 * rim + 0.12 * soft
        else:
            # hcc: often nearly invisible on T1/T2, always visible on DWI,
            # arterial hyperintensity with delay washout
            if rng.uniform() < 0.5:
                c1 = rng.uniform(0.0, 0.03)
                c2 = rng.uniform(0.0, 0.03)
            else:
                c1 = rng.uniform(0.05, 0.12)
                c2 = rng.uniform(0.05, 0.12)
            grids["t1"] -= c1 * soft
            grids["t2"] += c2 * soft
            grids["dwi"] += 0.30 * soft
            grids["ce_a"] += 0.40 * soft
            grids["ce_pv"] += 0.10 * soft
            grids["ce_d"] -= 0.25 * soft
    grids = {k: np.clip(v, 0.0, 1.0).astype(np.float32) for k, v in grids.items()}
    return Sample(sample_id=sample_id, mask=mask, box=box, cls=cls, **grids)


def generate_corpus(spec: CorpusSpec) -> list[Sample]:
    rng = np.random.default_rng(spec.seed)
    n0, n1, n2 = class_counts(spec.count, spec.mix)
    plan = np.array([0] * n0 + [1] * n1 + [2] * n2)
    plan = plan[rng.permutation(spec.count)]
    return [
        make_sample(rng, f"s{i:04d}", int(plan[i]), spec.height, spec.width)
        for i in range(spec.count)
    ]
