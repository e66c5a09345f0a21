"""Adversarial training loop, checkpointing and inference.

Per step, from one forward pass over a batch: integrate predicted and
ground-truth canvases, score both with the discriminator, update the
discriminator first, then update the whole generator (segmentation trunk +
detection head) from the summed losses. Plain SGD by default; adam behind the
config flag. Batch order comes from a dedicated numpy generator whose state
rides along in the checkpoint, so a resumed run continues bit-identically.

Inference touches the non-contrast grids only; contrast phases and the
discriminator exist purely at training time.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .boxes import BoxTuple, clamp_box
from .canvas import CANVAS_SIZE, integrate, integrate_soft
from .config import TrainConfig, config_from_echo
from .edges import block_average2, modality_pyramids
from .encoder import MODALITIES, POOL_FACTOR
from .errors import ConfigError, DataError, FormatError, NumericError
from .heads import DetPrediction, SegPrediction
from .losses import LossWeights, adv_loss, cls_loss, disc_loss, pix_ce, reg_loss
from .metrics import PerSampleEval, EvalReport, aggregate, box_iou, dsc, pixel_accuracy
from .model import Generator, build_models, zero_fill_grids
from .phantom import Sample
from .radiomics import Normalizer, extract_mpr, region_features
from .storage import MAGIC, frame_array, load_corpus, unframe_array
from .torchutil import to_batch

log = logging.getLogger(__name__)

LOG_HEADER = ("step", "l_seg", "l_pixce", "l_adv_seg", "l_cls", "l_reg", "l_adv_dec", "l_disc")
CKPT_NAME = "checkpoint.uald"
LOG_NAME = "train_log.csv"

_PHASE_GRID = {"a": "ce_a", "pv": "ce_pv", "delay": "ce_d"}


@dataclass
class StepRecord:
    step: int
    l_seg: float
    l_pixce: float
    l_adv_seg: float
    l_cls: float
    l_reg: float
    l_adv_dec: float
    l_disc: float

    def row(self) -> str:
        vals = [str(self.step)] + [f"{getattr(self, k):.6f}" for k in LOG_HEADER[1:]]
        return ",".join(vals)


@dataclass
class _Prep:
    """Per-sample tensors cached once; the corpus is fixed during a run."""
    sample: Sample
    grids: dict[str, torch.Tensor]                 # (1,1,H,W) each, combo-zeroed
    pyr: dict[str, list[torch.Tensor]] | None
    mask_t: torch.Tensor                           # (1,1,H,W)
    gt_canvas_t: torch.Tensor | None               # (1,1,64,64)
    gt_mpr: np.ndarray | None
    box_t: torch.Tensor | None                     # (3,) float32


def phase_grids(sample: Sample, phases: tuple[str, ...]) -> dict[str, np.ndarray]:
    out = {}
    for ph in phases:
        g = getattr(sample, _PHASE_GRID[ph])
        if g is None:
            raise DataError(f"{sample.sample_id}: phase {ph} required but missing")
        out[ph] = g
    return out


def resize_to_canvas(grid: np.ndarray) -> np.ndarray:
    """Block-average an H x W grid down to the 64 x 64 canvas extent."""
    g = np.asarray(grid, dtype=np.float32)
    while g.shape[0] > CANVAS_SIZE:
        g = block_average2(g).astype(np.float32)
    if g.shape != (CANVAS_SIZE, CANVAS_SIZE):
        raise DataError(f"grid {grid.shape} cannot be block-averaged to {CANVAS_SIZE}")
    return g


def _resize_probs_t(probs: torch.Tensor) -> torch.Tensor:
    """Differentiable counterpart of resize_to_canvas for (H,W) tensors."""
    h = probs.shape[0]
    if h == CANVAS_SIZE:
        return probs
    factor = h // CANVAS_SIZE
    if factor * CANVAS_SIZE != h:
        raise DataError(f"probability map {tuple(probs.shape)} cannot resize to {CANVAS_SIZE}")
    return torch.nn.functional.avg_pool2d(probs.unsqueeze(0).unsqueeze(0), factor).squeeze(0).squeeze(0)


def _gt_canvas(sample: Sample, cfg: TrainConfig) -> np.ndarray:
    if "cswp" in cfg.ablate:
        return resize_to_canvas(sample.mask)
    return integrate(sample.mask, sample.box).values


def _gt_region_vector(sample: Sample, cfg: TrainConfig, normalizer: Normalizer | None) -> np.ndarray:
    grids = phase_grids(sample, cfg.phases)
    if "cswp" in cfg.ablate:
        vec = region_features(sample.mask >= 0.5, grids, normalizer)
    else:
        vec = extract_mpr(integrate(sample.mask, sample.box), None, grids, normalizer)
    return vec.values.astype(np.float32)


def fit_normalizer(samples: list[Sample], cfg: TrainConfig) -> Normalizer | None:
    """Z-stats over ground-truth canvas features of the training corpus."""
    if "mprgd" in cfg.ablate or "mpr" in cfg.ablate:
        return None
    vecs = [_gt_region_vector(s, cfg, None) for s in samples if s.cls >= 1]
    if not vecs:
        return None
    return Normalizer.fit([v.astype(np.float64) for v in vecs])


def prepare_sample(sample: Sample, cfg: TrainConfig, use_edges: bool,
                   with_disc: bool, normalizer: Normalizer | None) -> _Prep:
    grids = zero_fill_grids(sample, cfg.modalities)
    pyr_t = None
    if use_edges:
        pyramids = modality_pyramids(grids["t1"], grids["t2"], grids["dwi"])
        pyr_t = {m: [to_batch(lev) for lev in pyramids[m].levels] for m in MODALITIES}
    grids_t = {m: to_batch(grids[m]) for m in MODALITIES}
    mask_t = to_batch(sample.mask)
    gt_canvas_t = None
    gt_mpr = None
    box_t = None
    if sample.cls >= 1:
        box_t = torch.tensor(sample.box.astuple(), dtype=torch.float32)
        if with_disc:
            gt_canvas_t = to_batch(_gt_canvas(sample, cfg))
            if normalizer is not None:
                gt_mpr = _gt_region_vector(sample, cfg, normalizer)
    return _Prep(sample=sample, grids=grids_t, pyr=pyr_t, mask_t=mask_t,
                 gt_canvas_t=gt_canvas_t, gt_mpr=gt_mpr, box_t=box_t)


@dataclass
class TrainState:
    cfg: TrainConfig
    gen: Generator
    disc: torch.nn.Module | None
    opt_gen: torch.optim.Optimizer
    opt_disc: torch.optim.Optimizer | None
    rng: np.random.Generator
    normalizer: Normalizer | None
    samples: list[_Prep]
    step: int = 0
    empty_regions: int = 0


def _fake_mpr(prep: _Prep, probs_t: torch.Tensor, canvas_t: torch.Tensor,
              box_vals, state: TrainState) -> np.ndarray:
    cfg = state.cfg
    grids = phase_grids(prep.sample, cfg.phases)
    if "cswp" in cfg.ablate:
        # no canvas: read features straight off the thresholded prediction
        vec = region_features(probs_t.detach().numpy() >= 0.5, grids, state.normalizer)
    else:
        bx = BoxTuple(*(float(v) for v in box_vals))
        vec = extract_mpr(canvas_t.detach().numpy(), bx, grids, state.normalizer)
    if vec.empty_region:
        state.empty_regions += 1
        log.info("step %d: %s predicted an empty canvas region, zero radiomics vector",
                 state.step + 1, prep.sample.sample_id)
    return vec.values.astype(np.float32)


def train_step(state: TrainState) -> StepRecord:
    cfg = state.cfg
    weights = LossWeights(cfg.lambda1, cfg.lambda2, cfg.lambda3)
    n = len(state.samples)
    k = min(cfg.batch_size, n)
    idx = state.rng.choice(n, size=k, replace=False)
    batch = [state.samples[int(i)] for i in idx]
    height, width = batch[0].sample.shape

    grids = {m: torch.cat([b.grids[m] for b in batch]) for m in MODALITIES}
    pyr = None
    if batch[0].pyr is not None:
        pyr = {m: [torch.cat([b.pyr[m][lev] for b in batch]) for lev in range(len(batch[0].pyr[m]))]
               for m in MODALITIES}
    probs, logits, boxes = state.gen(grids, pyr, height, width)
    class_probs = torch.softmax(logits, dim=1)

    tumor = [i for i, b in enumerate(batch) if b.sample.cls >= 1]
    use_canvas = "cswp" not in cfg.ablate

    fake_canvases: list[torch.Tensor] = []
    fake_mprs: list[np.ndarray] = []
    for i in tumor:
        p2 = torch.clamp(probs[i, 0], 0.0, 1.0)
        if use_canvas:
            cv = integrate_soft(p2, boxes[i], mode=cfg.cswp_mode)
        else:
            cv = _resize_probs_t(p2)
        fake_canvases.append(cv)
        if state.disc is not None and state.disc.mpr_len:
            fake_mprs.append(_fake_mpr(batch[i], p2, cv, boxes[i].detach(), state))

    l_disc_val = 0.0
    adv_scores = None
    run_adv = state.disc is not None and tumor
    if run_adv:
        fm = rm = None
        if state.disc.mpr_len:
            fm = torch.from_numpy(np.stack(fake_mprs))
            rm = torch.from_numpy(np.stack([batch[i].gt_mpr for i in tumor]))
        fake_in = torch.stack([c.detach() for c in fake_canvases]).unsqueeze(1)
        real_in = torch.cat([batch[i].gt_canvas_t for i in tumor])
        fake_scores_d = state.disc(fake_in, fm)
        real_scores = state.disc(real_in, rm)
        d_losses = [disc_loss(fake_scores_d[j], real_scores[j], cfg.swap_disc_labels)
                    for j in range(len(tumor))]
        d_total = torch.stack(d_losses).mean()

        # generator-side scores through the same (pre-update) discriminator,
        # with its parameters frozen so no gradient pollutes them
        for p in state.disc.parameters():
            p.requires_grad_(False)
        fake_in_g = torch.stack(fake_canvases).unsqueeze(1)
        adv_scores = state.disc(fake_in_g, fm)
        for p in state.disc.parameters():
            p.requires_grad_(True)

    masks = torch.cat([b.mask_t for b in batch])
    l_pixce = pix_ce(probs, masks)
    l_cls = torch.stack([cls_loss(class_probs[i], batch[i].sample.cls) for i in range(k)]).mean()
    if tumor:
        l_reg = torch.stack([
            reg_loss(boxes[i], batch[i].box_t, (height, width)) for i in tumor
        ]).mean()
    else:
        l_reg = torch.zeros(())
    if adv_scores is not None:
        l_adv = torch.stack([adv_loss(adv_scores[j], 1) for j in range(len(tumor))]).mean()
    else:
        l_adv = torch.zeros(())

    l_seg_total = l_pixce + weights.lambda1 * l_adv
    l_det_total = l_cls + weights.lambda2 * l_reg + weights.lambda3 * l_adv
    total = l_seg_total + l_det_total

    if not torch.isfinite(total):
        raise NumericError(
            f"step {state.step + 1}: non-finite loss "
            f"(pixce={l_pixce.item()}, cls={l_cls.item()}, reg={l_reg.item()}, "
            f"adv={l_adv.item()}, disc={l_disc_val})"
        )

    # both backwards read pre-update weights (Algorithm-literal: one forward,
    # then discriminator update followed by the generator update)
    state.opt_gen.zero_grad()
    total.backward()
    if run_adv:
        state.opt_disc.zero_grad()
        d_total.backward()
        state.opt_disc.step()
        l_disc_val = float(d_total.detach())
    state.opt_gen.step()

    state.step += 1
    return StepRecord(
        step=state.step,
        l_seg=l_seg_total.item(), l_pixce=l_pixce.item(), l_adv_seg=l_adv.item(),
        l_cls=l_cls.item(), l_reg=l_reg.item(), l_adv_dec=l_adv.item(),
        l_disc=l_disc_val,
    )


# ---------------------------------------------------------------- checkpoints

def _named_tensors(state: TrainState) -> dict[str, np.ndarray]:
    out = {}
    for name, p in state.gen.named_parameters():
        out[f"gen.{name}"] = p.detach().numpy()
    if state.disc is not None:
        for name, p in state.disc.named_parameters():
            out[f"disc.{name}"] = p.detach().numpy()
    return out


def _adam_entries(state: TrainState):
    """(tensors, step counters) of adam moments, keyed by parameter name."""
    tensors: dict[str, np.ndarray] = {}
    steps: dict[str, float] = {}
    for tag, module, opt in (("gen", state.gen, state.opt_gen),
                             ("disc", state.disc, state.opt_disc)):
        if module is None or not isinstance(opt, torch.optim.Adam):
            continue
        for name, p in module.named_parameters():
            st = opt.state.get(p)
            if not st:
                continue
            tensors[f"adam.{tag}.{name}.exp_avg"] = st["exp_avg"].numpy()
            tensors[f"adam.{tag}.{name}.exp_avg_sq"] = st["exp_avg_sq"].numpy()
            steps[f"{tag}.{name}"] = float(st["step"])
    return tensors, steps


def save_checkpoint(path: str | Path, state: TrainState) -> None:
    tensors = _named_tensors(state)
    adam_t, adam_steps = _adam_entries(state)
    tensors.update(adam_t)
    index = sorted(tensors)
    norm = None
    if state.normalizer is not None:
        norm = {"mean": [float(v) for v in state.normalizer.mean],
                "std": [float(v) for v in state.normalizer.std]}
    header = {
        "format": 1,
        "step": state.step,
        "config": state.cfg.echo(),
        "index": index,
        "rng": state.rng.bit_generator.state,
        "normalizer": norm,
        "adam_steps": adam_steps,
        "empty_regions": state.empty_regions,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name in index:
            f.write(frame_array(tensors[name]))
    os.replace(tmp, path)


@dataclass
class Checkpoint:
    header: dict
    tensors: dict[str, np.ndarray]


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise FormatError(f"{path}: not a checkpoint (only {len(blob)} bytes)")
    (hlen,) = struct.unpack_from("<I", blob, 0)
    if len(blob) < 4 + hlen:
        raise FormatError(f"{path}: truncated header, needs {hlen} bytes")
    try:
        header = json.loads(blob[4:4 + hlen])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: checkpoint header is not valid JSON: {e}") from None
    if blob[4 + hlen:4 + hlen + 4] != MAGIC:
        raise FormatError(f"{path}: first tensor frame missing after header")
    tensors = {}
    off = 4 + hlen
    for name in header.get("index", []):
        arr, off = unframe_array(blob, off, where=f"{path}[{name}]")
        tensors[name] = arr
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} trailing bytes after indexed tensors")
    return Checkpoint(header=header, tensors=tensors)


def _restore_params(module: torch.nn.Module, tensors: dict[str, np.ndarray], prefix: str):
    with torch.no_grad():
        for name, p in module.named_parameters():
            key = f"{prefix}.{name}"
            if key not in tensors:
                raise FormatError(f"checkpoint lacks tensor {key}")
            arr = tensors[key]
            if tuple(arr.shape) != tuple(p.shape):
                raise FormatError(f"checkpoint tensor {key} has shape {arr.shape}, model wants {tuple(p.shape)}")
            p.copy_(torch.from_numpy(arr))


def _restore_adam(state: TrainState, ckpt: Checkpoint):
    adam_steps = ckpt.header.get("adam_steps", {})
    for tag, module, opt in (("gen", state.gen, state.opt_gen),
                             ("disc", state.disc, state.opt_disc)):
        if module is None or not isinstance(opt, torch.optim.Adam):
            continue
        for name, p in module.named_parameters():
            key = f"{tag}.{name}"
            ea = ckpt.tensors.get(f"adam.{key}.exp_avg")
            eas = ckpt.tensors.get(f"adam.{key}.exp_avg_sq")
            if ea is None or eas is None:
                continue
            opt.state[p] = {
                "step": torch.tensor(adam_steps.get(key, 0.0)),
                "exp_avg": torch.from_numpy(ea.copy()),
                "exp_avg_sq": torch.from_numpy(eas.copy()),
            }


# ------------------------------------------------------------------ training

@dataclass
class TrainResult:
    checkpoint: Path
    log_path: Path
    steps: int
    records: list[StepRecord]


def _make_optimizer(cfg: TrainConfig, params) -> torch.optim.Optimizer:
    params = list(params)
    if cfg.optimizer == "adam":
        return torch.optim.Adam(params, lr=cfg.lr, foreach=True)
    return torch.optim.SGD(params, lr=cfg.lr)


def _check_corpus(samples: list[Sample], cfg: TrainConfig):
    shapes = {s.shape for s in samples}
    if len(shapes) != 1:
        raise DataError(f"corpus mixes grid shapes: {shapes}")
    h, w = shapes.pop()
    if h % POOL_FACTOR or w % POOL_FACTOR:
        raise DataError(f"grids {h}x{w} not divisible by the encoder shrink factor {POOL_FACTOR}")
    return h, w


def setup(cfg: TrainConfig, samples: list[Sample] | None = None) -> TrainState:
    cfg.validate()
    if samples is None:
        samples = load_corpus(cfg.data_dir)
    _check_corpus(samples, cfg)
    gen, disc = build_models(cfg)
    normalizer = fit_normalizer(samples, cfg)
    with_disc = disc is not None
    preps = [prepare_sample(s, cfg, gen.encoder.use_edges, with_disc, normalizer)
             for s in samples]
    opt_gen = _make_optimizer(cfg, gen.parameters())
    opt_disc = _make_optimizer(cfg, disc.parameters()) if with_disc else None
    rng = np.random.default_rng(cfg.seed)
    return TrainState(cfg=cfg, gen=gen, disc=disc, opt_gen=opt_gen, opt_disc=opt_disc,
                      rng=rng, normalizer=normalizer, samples=preps)


def _resume_state(cfg: TrainConfig) -> tuple[TrainConfig, Checkpoint]:
    ckpt = load_checkpoint(cfg.resume)
    stored = config_from_echo(
        ckpt.header["config"],
        iterations=cfg.iterations,
        data_dir=cfg.data_dir or None,
        out_dir=cfg.out_dir or None,
        checkpoint_every=cfg.checkpoint_every,
    )
    stored.resume = cfg.resume
    return stored, ckpt


def train(cfg: TrainConfig, samples: list[Sample] | None = None) -> TrainResult:
    ckpt = None
    if cfg.resume:
        cfg, ckpt = _resume_state(cfg)
    out_dir = Path(cfg.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    state = setup(cfg, samples)
    log_path = out_dir / LOG_NAME
    if ckpt is not None:
        _restore_params(state.gen, ckpt.tensors, "gen")
        if state.disc is not None:
            _restore_params(state.disc, ckpt.tensors, "disc")
        _restore_adam(state, ckpt)
        state.rng.bit_generator.state = ckpt.header["rng"]
        state.step = int(ckpt.header["step"])
        state.empty_regions = int(ckpt.header.get("empty_regions", 0))
        if ckpt.header.get("normalizer") is not None:
            state.normalizer = Normalizer(
                mean=np.array(ckpt.header["normalizer"]["mean"]),
                std=np.array(ckpt.header["normalizer"]["std"]),
            )
        if state.step >= cfg.iterations:
            raise ConfigError(
                f"checkpoint already at step {state.step}, iterations target {cfg.iterations}")
        mode = "a" if log_path.exists() else "w"
    else:
        mode = "w"
    ckpt_path = out_dir / CKPT_NAME
    records: list[StepRecord] = []
    with open(log_path, mode, newline="") as logf:
        if mode == "w":
            logf.write(",".join(LOG_HEADER) + "\n")
        while state.step < cfg.iterations:
            rec = train_step(state)
            records.append(rec)
            logf.write(rec.row() + "\n")
            logf.flush()
            if cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
                save_checkpoint(ckpt_path, state)
    save_checkpoint(ckpt_path, state)
    return TrainResult(checkpoint=ckpt_path, log_path=log_path, steps=state.step, records=records)


# ----------------------------------------------------------------- inference

def infer(sample: Sample, gen: Generator, cfg: TrainConfig) -> tuple[SegPrediction, DetPrediction]:
    """Non-contrast grids in, segmentation probabilities and a detection out."""
    height, width = sample.shape
    grids = zero_fill_grids(sample, cfg.modalities)
    pyr_t = None
    if gen.encoder.use_edges:
        pyramids = modality_pyramids(grids["t1"], grids["t2"], grids["dwi"])
        pyr_t = {m: [to_batch(lev) for lev in pyramids[m].levels] for m in MODALITIES}
    grids_t = {m: to_batch(grids[m]) for m in MODALITIES}
    with torch.no_grad():
        probs, logits, boxes = gen(grids_t, pyr_t, height, width)
    seg = SegPrediction(probs=probs[0, 0].numpy())
    cp = torch.softmax(logits, dim=1)[0].numpy()
    cx, cy, side = (float(v) for v in boxes[0])
    det = DetPrediction(class_probs=cp, box=clamp_box(BoxTuple(cx, cy, side), height, width))
    return seg, det


def evaluate(samples: list[Sample], gen: Generator, cfg: TrainConfig) -> EvalReport:
    rows = []
    for s in samples:
        seg, det = infer(s, gen, cfg)
        pred_mask = seg.mask()
        iou = None
        if s.box is not None:
            iou = box_iou(det.box, s.box)
        rows.append(PerSampleEval(
            sample_id=s.sample_id,
            dsc=dsc(pred_mask, s.mask),
            p_acc=pixel_accuracy(pred_mask, s.mask),
            iou=iou, gt_cls=s.cls, pred_cls=det.cls,
        ))
    return aggregate(rows)


def load_model_for_eval(ckpt_path: str | Path) -> tuple[Generator, TrainConfig]:
    ckpt = load_checkpoint(ckpt_path)
    cfg = config_from_echo(ckpt.header["config"])
    gen, disc = build_models(cfg)
    _restore_params(gen, ckpt.tensors, "gen")
    gen.eval()
    return gen, cfg
