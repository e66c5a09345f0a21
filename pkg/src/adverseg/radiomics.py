"""Hand-rolled first-order and co-occurrence features over the canvas region.

13 features per contrast phase: 8 first-order (mean, variance, skewness,
kurtosis, min, max, energy, 32-bin histogram entropy) + 5 from a symmetric
16-level GLCM at offset (1,0) (contrast, correlation, energy, homogeneity,
entropy). Phases concatenate in (arterial, portal-venous, delay) order with
absent phases omitted. The whole path is plain numpy and carries no gradient;
an empty region yields the documented all-zero vector.

Feature order is frozen in docs/radiomics_features.md.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import BoxTuple
from .canvas import CANVAS_SIZE, IntegrationCanvas, window_geometry
from .errors import DimensionError, DomainError

FO_NAMES = ("mean", "variance", "skewness", "kurtosis", "min", "max", "energy", "entropy")
GLCM_NAMES = ("contrast", "correlation", "energy", "homogeneity", "entropy")
PHASE_ORDER = ("a", "pv", "delay")
FEATURES_PER_PHASE = len(FO_NAMES) + len(GLCM_NAMES)

HIST_BINS = 32
GLCM_LEVELS = 16
GLCM_OFFSET = (1, 0)  # (dx, dy): one step right along the row

_TINY = 1e-12


def first_order(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise DimensionError("first_order got an empty region")
    mean = v.mean()
    m2 = ((v - mean) ** 2).mean()
    if m2 > _TINY:
        m3 = ((v - mean) ** 3).mean()
        m4 = ((v - mean) ** 4).mean()
        skew = m3 / m2 ** 1.5
        kurt = m4 / m2 ** 2
    else:
        skew = 0.0
        kurt = 0.0
    vmin, vmax = v.min(), v.max()
    energy = float((v * v).sum())
    if vmax > vmin:
        counts, _ = np.histogram(v, bins=HIST_BINS, range=(vmin, vmax))
    else:
        counts = np.zeros(HIST_BINS, dtype=np.int64)
        counts[0] = v.size
    p = counts[counts > 0] / v.size
    entropy = float(-(p * np.log2(p)).sum())
    return np.array([mean, m2, skew, kurt, vmin, vmax, energy, entropy], dtype=np.float64)


def glcm_features(grid: np.ndarray, region: np.ndarray,
                  levels: int = GLCM_LEVELS, offset: tuple[int, int] = GLCM_OFFSET) -> np.ndarray:
    """Symmetric co-occurrence features; pairs need both pixels inside region."""
    grid = np.asarray(grid, dtype=np.float64)
    region = np.asarray(region, dtype=bool)
    if grid.shape != region.shape:
        raise DimensionError(f"grid {grid.shape} vs region {region.shape}")
    vals = grid[region]
    if vals.size == 0:
        raise DimensionError("glcm_features got an empty region")
    vmin, vmax = vals.min(), vals.max()
    if vmax > vmin:
        width = (vmax - vmin) / levels
        q = np.clip(np.floor((grid - vmin) / width), 0, levels - 1).astype(np.int64)
    else:
        q = np.zeros_like(grid, dtype=np.int64)
    dx, dy = offset
    h, w = grid.shape
    src = region[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    dst = region[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)]
    both = src & dst
    if not both.any():
        return np.zeros(len(GLCM_NAMES), dtype=np.float64)
    qa = q[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)][both]
    qb = q[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)][both]
    P = np.zeros((levels, levels), dtype=np.float64)
    np.add.at(P, (qa, qb), 1.0)
    np.add.at(P, (qb, qa), 1.0)
    P /= P.sum()
    i = np.arange(levels, dtype=np.float64)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    contrast = float((P * (ii - jj) ** 2).sum())
    energy = float((P * P).sum())
    homogeneity = float((P / (1.0 + np.abs(ii - jj))).sum())
    pz = P[P > 0]
    entropy = float(-(pz * np.log2(pz)).sum())
    px = P.sum(axis=1)
    mu = float((i * px).sum())
    sigma2 = float(((i - mu) ** 2 * px).sum())
    if sigma2 > _TINY:
        correlation = float(((ii - mu) * (jj - mu) * P).sum() / sigma2)
    else:
        correlation = 0.0
    return np.array([contrast, correlation, energy, homogeneity, entropy], dtype=np.float64)


def feature_names(phases: tuple[str, ...]) -> list[str]:
    names = []
    for ph in PHASE_ORDER:
        if ph not in phases:
            continue
        names += [f"{ph}_fo_{n}" for n in FO_NAMES]
        names += [f"{ph}_glcm_{n}" for n in GLCM_NAMES]
    return names


@dataclass
class RadiomicsVector:
    values: np.ndarray
    names: list[str]
    empty_region: bool = False


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, vectors: list[np.ndarray]) -> "Normalizer":
        stack = np.stack(vectors)
        std = stack.std(axis=0)
        return cls(mean=stack.mean(axis=0), std=np.where(std < 1e-8, 1.0, std))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (v - self.mean) / self.std


def canvas_region(canvas_values: np.ndarray, box: BoxTuple,
                  height: int, width: int) -> np.ndarray:
    """Map tumor cells of the canvas window back to an image-coords bool mask.

    Tumor cells are 0.5 <= value <= 1; the sentinel ring (2) and soft-mode
    blend cells above 1 never qualify.
    """
    r0, c0, s = window_geometry(box)
    st = (CANVAS_SIZE - s) // 2
    win = canvas_values[st:st + s, st:st + s]
    hit = (win >= 0.5) & (win <= 1.0)
    region = np.zeros((height, width), dtype=bool)
    rr, cc = np.nonzero(hit)
    rr = rr + r0
    cc = cc + c0
    keep = (rr >= 0) & (rr < height) & (cc >= 0) & (cc < width)
    region[rr[keep], cc[keep]] = True
    return region


def extract_mpr(canvas: IntegrationCanvas | np.ndarray, box: BoxTuple | None,
                phase_grids: dict[str, np.ndarray],
                normalizer: Normalizer | None = None) -> RadiomicsVector:
    """Multi-phase radiomics vector for the canvas region.

    phase_grids: phase token ("a"/"pv"/"delay") -> CE grid; order of the output
    follows PHASE_ORDER regardless of dict order.
    """
    if isinstance(canvas, IntegrationCanvas):
        values, box = canvas.values, canvas.box
    else:
        values = canvas
        if box is None:
            raise DimensionError("raw canvas array needs an explicit box")
    phases = tuple(ph for ph in PHASE_ORDER if ph in phase_grids)
    if not phases:
        raise DimensionError("no contrast phases given")
    any_grid = phase_grids[phases[0]]
    try:
        region = canvas_region(np.asarray(values), box, *any_grid.shape)
    except DomainError:
        # predicted sides can shrink below one pixel mid-training; a window
        # with no cells is an empty region here, not a caller mistake
        names = feature_names(phases)
        return RadiomicsVector(values=np.zeros(len(names)), names=names, empty_region=True)
    return region_features(region, phase_grids, normalizer)


def region_features(region: np.ndarray, phase_grids: dict[str, np.ndarray],
                    normalizer: Normalizer | None = None) -> RadiomicsVector:
    """Same vector from an explicit image-coords region (no-canvas ablation)."""
    phases = tuple(ph for ph in PHASE_ORDER if ph in phase_grids)
    names = feature_names(phases)
    if not region.any():
        return RadiomicsVector(values=np.zeros(len(names)), names=names, empty_region=True)
    feats = []
    for ph in phases:
        g = np.asarray(phase_grids[ph], dtype=np.float64)
        feats.append(first_order(g[region]))
        feats.append(glcm_features(g, region))
    vec = np.concatenate(feats)
    if normalizer is not None:
        vec = normalizer.apply(vec)
    return RadiomicsVector(values=vec, names=names, empty_region=False)
