"""Overlay and heatmap PNGs for eyeballing predictions."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from .heads import DetPrediction, SegPrediction
from .phantom import CLASS_NAMES, Sample


def _draw_box(ax, box, color):
    half = box.side / 2.0
    ax.add_patch(Rectangle((box.cx - half, box.cy - half), box.side, box.side,
                           fill=False, edgecolor=color, linewidth=1.2))


def save_overlays(sample: Sample, seg: SegPrediction, det: DetPrediction,
                  out_dir: str | Path, modalities=("t1", "t2", "dwi")) -> list[Path]:
    """One `<sample_id>_<modality>_overlay.png` per non-contrast modality."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pred_mask = seg.mask()
    written = []
    for mod in modalities:
        grid = getattr(sample, mod)
        if grid is None:
            continue
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.imshow(grid, cmap="gray", vmin=0, vmax=1)
        if sample.mask.any():
            ax.contour(sample.mask, levels=[0.5], colors="lime", linewidths=1.0)
        if pred_mask.any():
            ax.contour(pred_mask, levels=[0.5], colors="red", linewidths=0.8)
        _draw_box(ax, det.box, "red")
        if sample.box is not None:
            _draw_box(ax, sample.box, "lime")
        ax.set_title(f"{sample.sample_id} {mod}  gt={CLASS_NAMES[sample.cls]} pred={CLASS_NAMES[det.cls]}",
                     fontsize=8)
        ax.axis("off")
        path = out_dir / f"{sample.sample_id}_{mod}_overlay.png"
        fig.savefig(path, dpi=110, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def save_heatmap(sample: Sample, seg: SegPrediction, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(seg.probs, cmap="magma", vmin=0, vmax=1)
    fig.colorbar(im, ax=ax, fraction=0.046)
    ax.set_title(f"{sample.sample_id} probability", fontsize=8)
    ax.axis("off")
    path = out_dir / f"{sample.sample_id}_heatmap.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path
